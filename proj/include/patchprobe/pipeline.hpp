#pragma once

// End-to-end flows shared by the command line and the test suites: loading
// inputs, extracting signature files, testing targets, evaluating manifests.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "patchprobe/emulator.hpp"
#include "patchprobe/error.hpp"
#include "patchprobe/liftx86.hpp"
#include "patchprobe/matcher.hpp"
#include "patchprobe/metrics.hpp"
#include "patchprobe/mir.hpp"
#include "patchprobe/patchmeta.hpp"
#include "patchprobe/signature.hpp"

namespace patchprobe {

enum class InputKind : std::uint8_t { Mir, X86 };

inline const char* to_string(InputKind k) { return k == InputKind::Mir ? "mir" : "x86"; }

inline InputKind input_kind_from_string(const std::string& s) {
    if (s == "mir") return InputKind::Mir;
    if (s == "x86" || s == "x86-listing") return InputKind::X86;
    throw Error("unknown input kind '" + s + "' (expected mir or x86)");
}

/// Guesses the kind from content: a line starting with `func ` means mini IR.
inline InputKind detect_kind(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view l = detail::trim(text.substr(pos, nl - pos));
        if (l.rfind("func ", 0) == 0) return InputKind::Mir;
        if (!l.empty() && l.back() == ':' && l.find('<') != std::string_view::npos) return InputKind::X86;
        pos = nl + 1;
    }
    throw Error("cannot tell whether the input is mini IR or an x86 listing; pass --kind");
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<MirFunction> load_functions(std::string_view text, InputKind kind, const SideTables* tables = nullptr) {
    if (kind == InputKind::Mir) return parse_mir(text);
    std::vector<MirFunction> out;
    for (const auto& l : parse_listing(text)) out.push_back(lift(l, tables ? &tables->call_arity : nullptr));
    return out;
}

inline const MirFunction& select_function(const std::vector<MirFunction>& fns, const std::string& name) {
    for (const auto& f : fns)
        if (f.name == name) return f;
    throw MissingFunctionError(name);
}

struct PipelineConfig {
    EmulationLimits limits{};
    MatchOptions match{};
    OracleConfig oracle{};
};

inline nlohmann::json to_json(const PipelineConfig& c) {
    const auto& w = c.match.weights;
    return {{"limits", {{"max_blocks", c.limits.max_blocks}, {"max_paths", c.limits.max_paths}}},
            {"weights",
             {{"call", w.call}, {"condition", w.condition}, {"reg_write", w.reg_write}, {"mem_store", w.mem_store}, {"return", w.ret}}},
            {"stack_offset_insensitive", c.match.stack_offset_insensitive},
            {"oracle",
             {{"reduced_width", c.oracle.reduced_width},
              {"max_exhaustive_symbols", c.oracle.max_exhaustive_symbols},
              {"samples", c.oracle.samples},
              {"quick_samples", c.oracle.quick_samples},
              {"seed", c.oracle.seed}}}};
}

/// Traces of one function, with a diagnostic when the limits cut emulation short.
inline EmulationResult emulate(const MirFunction& f, const EmulationLimits& limits, std::vector<std::string>* diagnostics = nullptr) {
    const Cfg cfg = build_cfg(f);
    EmulationResult r = emulate_function(cfg, limits);
    if (r.partial && diagnostics)
        diagnostics->push_back(f.name + ": emulation limit reached, " + std::to_string(r.unvisited_blocks) + " blocks unvisited");
    return r;
}

struct ExtractInputs {
    std::string patch_id;
    std::string function;  // empty: the only function of the vulnerable input
    std::string vuln_text, patched_text;
    InputKind kind = InputKind::Mir;
    std::string diff_text;
    std::string linemap_vuln_text, linemap_patched_text;
    SideTables tables{};
};

inline SignatureFile extract(const ExtractInputs& in, const PipelineConfig& cfg = {}) {
    const auto vf = load_functions(in.vuln_text, in.kind, &in.tables);
    const auto pf = load_functions(in.patched_text, in.kind, &in.tables);
    std::string name = in.function;
    if (name.empty()) {
        if (vf.size() != 1) throw Error("the vulnerable reference holds " + std::to_string(vf.size()) + " functions; name one");
        name = vf.front().name;
    }
    const MirFunction& v = select_function(vf, name);
    const MirFunction& p = select_function(pf, name);
    const auto hunks = parse_diff(in.diff_text);
    const LineMap lv = parse_linemap(in.linemap_vuln_text, BinaryRole::Vulnerable);
    const LineMap lp = parse_linemap(in.linemap_patched_text, BinaryRole::Patched);

    std::vector<std::string> diags;
    const auto vr = emulate(v, cfg.limits, &diags);
    const auto pr = emulate(p, cfg.limits, &diags);
    for (auto a : unmapped_addresses(lv, v)) diags.push_back("vulnerable reference: address " + hex(a) + " has no line");
    for (auto a : unmapped_addresses(lp, p)) diags.push_back("patched reference: address " + hex(a) + " has no line");

    BuiltinOracle oracle(cfg.oracle);
    MatchOptions mo = cfg.match;
    if (!mo.oracle) mo.oracle = &oracle;
    SignatureFile sf = build_signature_file(in.patch_id, name, hunks, {&vr.traces, &lv}, {&pr.traces, &lp}, in.tables, mo);
    sf.params = to_json(cfg);
    sf.params["kind"] = to_string(in.kind);
    diags.insert(diags.end(), sf.diagnostics.begin(), sf.diagnostics.end());
    sf.diagnostics = std::move(diags);
    return sf;
}

/// Complete effect set of each named target function.
inline std::map<std::string, std::vector<Effect>> target_effects(const std::vector<MirFunction>& fns,
                                                                 const std::vector<std::string>& names,
                                                                 const EmulationLimits& limits,
                                                                 std::vector<std::string>* diagnostics = nullptr) {
    std::map<std::string, std::vector<Effect>> out;
    for (const auto& n : names) {
        if (out.count(n)) continue;
        const auto r = emulate(select_function(fns, n), limits, diagnostics);
        out[n] = extract_target(r.traces);
    }
    return out;
}

struct TestResult {
    Verdict verdict;
    std::vector<std::string> diagnostics;
};

inline TestResult test_target(const std::vector<SignatureFile>& sigs, std::string_view target_text, InputKind kind,
                              const PipelineConfig& cfg = {}, const SideTables* tables = nullptr) {
    TestResult r;
    const auto fns = load_functions(target_text, kind, tables);
    std::vector<std::string> names;
    for (const auto& s : sigs) names.push_back(s.function);
    for (const auto& s : sigs)
        if (std::none_of(fns.begin(), fns.end(), [&](const MirFunction& f) { return f.name == s.function; }))
            throw MissingFunctionError(s.function);
    const auto effects = target_effects(fns, names, cfg.limits, &r.diagnostics);
    BuiltinOracle oracle(cfg.oracle);
    MatchOptions mo = cfg.match;
    if (!mo.oracle) mo.oracle = &oracle;
    r.verdict = decide_binary(sigs, effects, mo);
    return r;
}

inline nlohmann::json report_json(const TestResult& r, const PipelineConfig& cfg) {
    nlohmann::json j = to_json(r.verdict);
    j["version"] = 1;
    j["params"] = to_json(cfg);
    j["diagnostics"] = r.diagnostics;
    return j;
}

// ---- manifests ----

struct ManifestPair {
    std::string patch_id;
    std::filesystem::path target;
    InputKind kind = InputKind::Mir;
    std::vector<std::string> functions;
    std::optional<Status> ground_truth;
    std::optional<std::filesystem::path> sidetables;
};

struct Manifest {
    std::map<std::string, std::vector<std::filesystem::path>> signatures;
    std::vector<ManifestPair> pairs;
};

inline Status status_from_string(const std::string& s) {
    if (s == "patched" || s == "PATCHED") return Status::Patched;
    if (s == "vulnerable" || s == "VULNERABLE") return Status::Vulnerable;
    throw Error("unknown ground truth '" + s + "'");
}

/// Relative paths resolve against `base`.
inline Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base) {
    Manifest m;
    auto path = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p; };
    try {
        if (j.at("version").get<int>() != 1) throw Error("unsupported manifest version");
        if (j.contains("signatures"))
            for (const auto& [id, files] : j.at("signatures").items())
                for (const auto& f : files) m.signatures[id].push_back(path(f.get<std::string>()));
        for (const auto& pj : j.at("pairs")) {
            ManifestPair p;
            p.patch_id = pj.at("patch_id").get<std::string>();
            p.target = path(pj.at("target").get<std::string>());
            p.kind = input_kind_from_string(pj.value("kind", std::string("mir")));
            if (pj.contains("functions")) p.functions = pj.at("functions").get<std::vector<std::string>>();
            if (pj.contains("ground_truth")) p.ground_truth = status_from_string(pj.at("ground_truth").get<std::string>());
            if (pj.contains("sidetables")) p.sidetables = path(pj.at("sidetables").get<std::string>());
            m.pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

enum class ErrorPolicy : std::uint8_t { Vulnerable, Skip };

struct PairOutcome {
    std::optional<Status> verdict;
    std::string error;
};

struct EvalReport {
    std::vector<PairOutcome> outcomes;  // manifest order
    MetricsReport metrics;
};

inline PairOutcome run_pair(const Manifest& m, const ManifestPair& p, const PipelineConfig& cfg) {
    PairOutcome out;
    try {
        auto it = m.signatures.find(p.patch_id);
        if (it == m.signatures.end()) throw Error("no signature files for " + p.patch_id);
        std::vector<SignatureFile> sigs;
        for (const auto& f : it->second) {
            SignatureFile sf = load_signature_file(read_file(f));
            if (p.functions.empty() || std::count(p.functions.begin(), p.functions.end(), sf.function)) sigs.push_back(std::move(sf));
        }
        for (const auto& fn : p.functions)
            if (std::none_of(sigs.begin(), sigs.end(), [&](const SignatureFile& s) { return s.function == fn; }))
                throw Error("no signature file for function " + fn + " of " + p.patch_id);
        SideTables tables;
        if (p.sidetables) tables = parse_side_tables(read_file(*p.sidetables));
        out.verdict = test_target(sigs, read_file(p.target), p.kind, cfg, &tables).verdict.status;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

inline EvalReport evaluate(const Manifest& m, ErrorPolicy policy, unsigned jobs = 1, const PipelineConfig& cfg = {}) {
    EvalReport r;
    r.outcomes.resize(m.pairs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < m.pairs.size(); i = next++) r.outcomes[i] = run_pair(m, m.pairs[i], cfg);
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, m.pairs.size()))));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    MetricsReport counts;
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        const auto& p = m.pairs[i];
        if (!p.ground_truth) throw Error("pair " + std::to_string(i) + " (" + p.patch_id + ") has no ground truth");
        std::optional<Status> v = r.outcomes[i].verdict;
        if (!v && policy == ErrorPolicy::Vulnerable) v = Status::Vulnerable;
        if (!v) continue;
        tally(counts, *v == Status::Vulnerable, *p.ground_truth == Status::Vulnerable);
    }
    r.metrics = finalize(counts);
    return r;
}

inline nlohmann::json to_json(const EvalReport& r, const Manifest& m, ErrorPolicy policy, const PipelineConfig& cfg) {
    nlohmann::json j;
    j["version"] = 1;
    j["error_policy"] = policy == ErrorPolicy::Vulnerable ? "vulnerable" : "skip";
    j["params"] = to_json(cfg);
    j["pairs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        const auto& p = m.pairs[i];
        const auto& o = r.outcomes[i];
        nlohmann::json pj = {{"patch_id", p.patch_id}, {"target", p.target.string()}};
        pj["verdict"] = o.verdict ? nlohmann::json(to_string(*o.verdict)) : nlohmann::json(nullptr);
        pj["ground_truth"] = p.ground_truth ? nlohmann::json(to_string(*p.ground_truth)) : nlohmann::json(nullptr);
        if (!o.error.empty()) pj["error"] = o.error;
        j["pairs"].push_back(std::move(pj));
    }
    j["metrics"] = to_json(r.metrics);
    return j;
}

} // namespace patchprobe
