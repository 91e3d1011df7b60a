// patchprobe: extract patch signatures from reference builds and test targets.
//
// Exit codes: test prints PATCHED (0) or VULNERABLE (1); every command exits
// 2 on error with a JSON error object on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "patchprobe/patchprobe.hpp"

namespace fs = std::filesystem;
using namespace patchprobe;

namespace {

constexpr int kExitError = 2;

struct CommonFlags {
    std::size_t max_blocks = EmulationLimits{}.max_blocks;
    std::size_t max_paths = EmulationLimits{}.max_paths;
    std::string weights;
    bool stack_offset_insensitive = false;
    OracleConfig oracle{};
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--max-blocks", f.max_blocks, "Emulation limit on basic blocks")->check(CLI::PositiveNumber);
    app->add_option("--max-paths", f.max_paths, "Emulation limit on paths")->check(CLI::PositiveNumber);
    app->add_option("--weights", f.weights, "Match weights, e.g. c=3,r=1 (c call+condition, r regwrite, m store, t return)");
    app->add_flag("--stack-offset-insensitive", f.stack_offset_insensitive, "Compare frame-relative stores by value only");
    app->add_option("--oracle-samples", f.oracle.samples, "Random samples for the sampled equivalence tier");
    app->add_option("--oracle-seed", f.oracle.seed, "Seed of the sampled equivalence tier");
    app->add_option("--oracle-width", f.oracle.reduced_width, "Bit width of the exhaustive equivalence tier")
        ->check(CLI::IsMember({1u, 8u, 16u}));
}

PipelineConfig config_of(const CommonFlags& f) {
    PipelineConfig c;
    c.limits.max_blocks = f.max_blocks;
    c.limits.max_paths = f.max_paths;
    c.match.weights = parse_weights(f.weights);
    c.match.stack_offset_insensitive = f.stack_offset_insensitive;
    c.oracle = f.oracle;
    return c;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

void warn(const std::vector<std::string>& diagnostics) {
    for (const auto& d : diagnostics) std::cerr << "warning: " << d << "\n";
}

int fail(const std::string& type, const std::string& message) {
    nlohmann::json j = {{"error", {{"type", type}, {"message", message}}}};
    std::cerr << j.dump() << "\n";
    return kExitError;
}

InputKind kind_of(const std::string& flag, const std::string& text) {
    return flag.empty() ? detect_kind(text) : input_kind_from_string(flag);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic patch presence testing over mini-IR and x86-64 listings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "patchprobe 1.0.0");

    // extract
    CommonFlags ex_flags;
    std::string ex_vuln, ex_patched, ex_diff, ex_lm_vuln, ex_lm_patched, ex_tables, ex_kind, ex_function, ex_id, ex_out;
    auto* ex = app.add_subcommand("extract", "Extract a signature file from vulnerable and patched references");
    ex->add_option("--vuln", ex_vuln, "Vulnerable reference (mini IR or x86 listing)")->required()->check(CLI::ExistingFile);
    ex->add_option("--patched", ex_patched, "Patched reference")->required()->check(CLI::ExistingFile);
    ex->add_option("--diff", ex_diff, "Unified diff of the fix")->required()->check(CLI::ExistingFile);
    ex->add_option("--linemap-vuln", ex_lm_vuln, "Address-to-line map of the vulnerable reference")->required()->check(CLI::ExistingFile);
    ex->add_option("--linemap-patched", ex_lm_patched, "Address-to-line map of the patched reference")
        ->required()
        ->check(CLI::ExistingFile);
    ex->add_option("--sidetables", ex_tables, "Call arity and string literal tables (JSON)")->check(CLI::ExistingFile);
    ex->add_option("--kind", ex_kind, "Input kind")->check(CLI::IsMember({"mir", "x86"}));
    ex->add_option("--function", ex_function, "Affected function (default: the only one)");
    ex->add_option("--patch-id", ex_id, "Patch identifier (default: diff file stem)");
    ex->add_option("-o,--output", ex_out, "Signature file to write (default stdout)");
    add_common(ex, ex_flags);

    // test
    CommonFlags te_flags;
    std::vector<std::string> te_sigs;
    std::string te_target, te_kind, te_tables, te_format = "json", te_out;
    auto* te = app.add_subcommand("test", "Test a target against signature files; exit 0 patched, 1 vulnerable");
    te->add_option("--sig", te_sigs, "Signature file (repeatable)")->required()->check(CLI::ExistingFile);
    te->add_option("--target", te_target, "Target (mini IR or x86 listing)")->required()->check(CLI::ExistingFile);
    te->add_option("--kind", te_kind, "Target kind")->check(CLI::IsMember({"mir", "x86"}));
    te->add_option("--sidetables", te_tables, "Call arity table for x86 targets (JSON)")->check(CLI::ExistingFile);
    te->add_option("--format", te_format, "Report format")->check(CLI::IsMember({"json", "table"}));
    te->add_option("-o,--output", te_out, "Report file (default stdout)");
    add_common(te, te_flags);

    // eval
    CommonFlags ev_flags;
    std::string ev_manifest, ev_policy = "vulnerable", ev_out;
    unsigned ev_jobs = 1;
    auto* ev = app.add_subcommand("eval", "Evaluate a manifest of (patch, target) pairs");
    ev->add_option("--manifest", ev_manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    ev->add_option("--error-policy", ev_policy, "How failing pairs count")->check(CLI::IsMember({"vulnerable", "skip"}));
    ev->add_option("--jobs", ev_jobs, "Pairs evaluated in parallel")->check(CLI::PositiveNumber);
    ev->add_option("-o,--output", ev_out, "Report file (default stdout)");
    add_common(ev, ev_flags);

    // dump-tables
    auto* dt = app.add_subcommand("dump-tables", "Print the x86 register and jcc tables");
    app.add_flag("--dump-tables", "Same as the dump-tables command");

    // trace
    std::string tr_input, tr_kind, tr_function, tr_tables;
    std::size_t tr_max_blocks = EmulationLimits{}.max_blocks, tr_max_paths = EmulationLimits{}.max_paths;
    bool tr_ir = false;
    auto* tr = app.add_subcommand("trace", "Print the lifted IR or the emulation traces of a function");
    tr->add_option("--input", tr_input, "Mini IR or x86 listing")->required()->check(CLI::ExistingFile);
    tr->add_option("--kind", tr_kind, "Input kind")->check(CLI::IsMember({"mir", "x86"}));
    tr->add_option("--function", tr_function, "Function (default: every function)");
    tr->add_option("--sidetables", tr_tables, "Call arity table (JSON)")->check(CLI::ExistingFile);
    tr->add_flag("--ir", tr_ir, "Print the (lifted) IR instead of traces");
    tr->add_option("--max-blocks", tr_max_blocks)->check(CLI::PositiveNumber);
    tr->add_option("--max-paths", tr_max_paths)->check(CLI::PositiveNumber);

    app.require_subcommand(0, 1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitError;
    }

    try {
        if (dt->parsed() || app.count("--dump-tables")) {
            std::cout << x86::dump_tables();
            return 0;
        }
        if (ex->parsed()) {
            const PipelineConfig cfg = config_of(ex_flags);
            ExtractInputs in;
            in.vuln_text = read_file(ex_vuln);
            in.patched_text = read_file(ex_patched);
            in.kind = kind_of(ex_kind, in.vuln_text);
            in.diff_text = read_file(ex_diff);
            in.linemap_vuln_text = read_file(ex_lm_vuln);
            in.linemap_patched_text = read_file(ex_lm_patched);
            if (!ex_tables.empty()) in.tables = parse_side_tables(read_file(ex_tables));
            in.function = ex_function;
            in.patch_id = ex_id.empty() ? fs::path(ex_diff).stem().string() : ex_id;
            const SignatureFile sf = extract(in, cfg);
            warn(sf.diagnostics);
            write_output(ex_out, save(sf));
            return 0;
        }
        if (te->parsed()) {
            const PipelineConfig cfg = config_of(te_flags);
            std::vector<SignatureFile> sigs;
            for (const auto& s : te_sigs) sigs.push_back(load_signature_file(read_file(s)));
            const std::string target = read_file(te_target);
            SideTables tables;
            if (!te_tables.empty()) tables = parse_side_tables(read_file(te_tables));
            const TestResult r = test_target(sigs, target, kind_of(te_kind, target), cfg, &tables);
            warn(r.diagnostics);
            write_output(te_out, te_format == "table" ? render_table(r.verdict) : report_json(r, cfg).dump(2) + "\n");
            return r.verdict.status == Status::Patched ? 0 : 1;
        }
        if (ev->parsed()) {
            const PipelineConfig cfg = config_of(ev_flags);
            const fs::path mp(ev_manifest);
            nlohmann::json mj;
            try {
                mj = nlohmann::json::parse(read_file(mp));
            } catch (const nlohmann::json::parse_error& e) {
                throw Error(std::string("manifest is not JSON: ") + e.what());
            }
            const Manifest m = parse_manifest(mj, mp.parent_path());
            const ErrorPolicy policy = ev_policy == "skip" ? ErrorPolicy::Skip : ErrorPolicy::Vulnerable;
            const EvalReport r = evaluate(m, policy, ev_jobs, cfg);
            for (std::size_t i = 0; i < r.outcomes.size(); ++i)
                if (!r.outcomes[i].error.empty())
                    std::cerr << "warning: pair " << i << " (" << m.pairs[i].patch_id << "): " << r.outcomes[i].error << "\n";
            write_output(ev_out, to_json(r, m, policy, cfg).dump(2) + "\n");
            return 0;
        }
        if (tr->parsed()) {
            const std::string text = read_file(tr_input);
            SideTables tables;
            if (!tr_tables.empty()) tables = parse_side_tables(read_file(tr_tables));
            const auto fns = load_functions(text, kind_of(tr_kind, text), &tables);
            EmulationLimits limits{tr_max_blocks, tr_max_paths};
            for (const auto& f : fns) {
                if (!tr_function.empty() && f.name != tr_function) continue;
                if (tr_ir) {
                    std::cout << render(f);
                    continue;
                }
                std::vector<std::string> diags;
                const auto r = emulate(f, limits, &diags);
                warn(diags);
                std::cout << "# function " << f.name << "\n" << render(r);
            }
            if (!tr_function.empty()) select_function(fns, tr_function);
            return 0;
        }
        std::cerr << app.help();
        return kExitError;
    } catch (const MissingFunctionError& e) {
        return fail("missing-function", e.what());
    } catch (const ParseError& e) {
        return fail("parse", e.what());
    } catch (const LiftError& e) {
        return fail("lift", e.what());
    } catch (const std::exception& e) {
        return fail("error", e.what());
    }
}
