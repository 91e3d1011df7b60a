#pragma once

// Signatures: reference-side effects per hunk, target-side effect sets, and
// the signature file that carries them between extraction and testing.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "patchprobe/effect.hpp"
#include "patchprobe/emulator.hpp"
#include "patchprobe/match.hpp"
#include "patchprobe/patchmeta.hpp"

namespace patchprobe {

enum class Purity : std::uint8_t { Modification, PureAddition, PureDeletion };

inline const char* to_string(Purity p) {
    switch (p) {
    case Purity::Modification: return "modification";
    case Purity::PureAddition: return "pure-addition";
    case Purity::PureDeletion: return "pure-deletion";
    }
    return "?";
}

inline Purity purity_from_string(const std::string& s) {
    if (s == "modification") return Purity::Modification;
    if (s == "pure-addition") return Purity::PureAddition;
    if (s == "pure-deletion") return Purity::PureDeletion;
    throw Error("unknown purity '" + s + "'");
}

struct HunkSignature {
    std::string id;
    std::string file;
    std::vector<Effect> vuln_sigs;
    std::vector<Effect> patch_sigs;
    Purity purity = Purity::Modification;
    bool condition_guarded = false;
};

struct SignatureFile {
    static constexpr int kVersion = 1;

    std::string patch_id;
    std::string function;
    nlohmann::json params = nlohmann::json::object();
    std::vector<HunkSignature> hunks;
    std::vector<std::string> diagnostics;
};

/// Removes register writes and memory stores whose value reappears inside a
/// later effect of the same path.
inline std::vector<Effect> sanitize(const std::vector<Effect>& path) {
    std::vector<Effect> out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const Effect& e = path[i];
        if (e.kind == EffectKind::RegWrite || e.kind == EffectKind::MemStore) {
            bool used = false;
            for (std::size_t j = i + 1; j < path.size() && !used; ++j)
                for (const Expr& x : path[j].exprs())
                    if (contains_subexpr(x, e.value)) {
                        used = true;
                        break;
                    }
            if (used) continue;
        }
        out.push_back(e);
    }
    return out;
}

inline std::vector<Trace> sanitize(const std::vector<Trace>& traces) {
    std::vector<Trace> out = traces;
    for (auto& t : out) t.effects = sanitize(t.effects);
    return out;
}

namespace detail {

inline void append_unique(std::vector<Effect>& out, std::unordered_set<std::string>& seen, const Effect& e) {
    if (seen.insert(effect_key(e)).second) out.push_back(e);
}

} // namespace detail

/// Effects at `addrs`, in trace order, without structural duplicates.
inline std::vector<Effect> extract_reference(const std::vector<Trace>& traces, const std::set<std::uint64_t>& addrs) {
    std::vector<Effect> out;
    std::unordered_set<std::string> seen;
    for (const auto& t : traces)
        for (const auto& e : t.effects)
            if (addrs.count(e.site)) detail::append_unique(out, seen, e);
    return out;
}

/// Every effect of every trace, in order, without structural duplicates.
inline std::vector<Effect> extract_target(const std::vector<Trace>& traces) {
    std::vector<Effect> out;
    std::unordered_set<std::string> seen;
    for (const auto& t : traces)
        for (const auto& e : t.effects) detail::append_unique(out, seen, e);
    return out;
}

/// Replaces string-literal call parameters with wildcards.
inline Effect wildcard_strings(Effect e, const SideTables& t) {
    if (e.kind != EffectKind::Call) return e;
    for (std::size_t i = 0; i < e.params.size(); ++i) {
        const Expr& p = e.params[i];
        const bool listed = t.is_string_arg(e.name, static_cast<unsigned>(i));
        const bool literal = p && p.is_const() && t.string_addrs.count(p.value());
        if (listed || literal) e.params[i] = Expr::wildcard();
    }
    return e;
}

/// Every effect of `a` matches some effect of `b`.
inline bool contained_in(const std::vector<Effect>& a, const std::vector<Effect>& b, const MatchOptions& o = {}) {
    return std::all_of(a.begin(), a.end(), [&](const Effect& x) {
        return std::any_of(b.begin(), b.end(), [&](const Effect& y) { return match(x, y, o); });
    });
}

struct PurityResult {
    Purity purity = Purity::Modification;
    bool collision = false;
};

inline PurityResult classify(const std::vector<Effect>& vuln, const std::vector<Effect>& patch, const MatchOptions& o = {}) {
    const bool vuln_in_patch = contained_in(vuln, patch, o);
    const bool patch_in_vuln = contained_in(patch, vuln, o);
    if (vuln_in_patch && patch_in_vuln) return {Purity::Modification, true};
    if (vuln_in_patch) return {Purity::PureAddition, false};
    if (patch_in_vuln) return {Purity::PureDeletion, false};
    return {Purity::Modification, false};
}

/// A patched-side condition with no counterpart among the vulnerable-side conditions.
inline bool condition_guarded(const std::vector<Effect>& vuln, const std::vector<Effect>& patch, const MatchOptions& o = {}) {
    for (const auto& p : patch) {
        if (p.kind != EffectKind::Condition) continue;
        const bool known = std::any_of(vuln.begin(), vuln.end(), [&](const Effect& v) { return match(p, v, o); });
        if (!known) return true;
    }
    return false;
}

struct ReferenceInput {
    const std::vector<Trace>* traces = nullptr;
    const LineMap* linemap = nullptr;
};

/// Builds the per-hunk signatures of one function. Traces are sanitized per
/// path before being filtered down to each hunk's addresses.
inline SignatureFile build_signature_file(const std::string& patch_id, const std::string& function,
                                          const std::vector<Hunk>& hunks, const ReferenceInput& vuln,
                                          const ReferenceInput& patched, const SideTables& tables = {},
                                          const MatchOptions& o = {}) {
    SignatureFile sf;
    sf.patch_id = patch_id;
    sf.function = function;
    if (hunks.empty()) sf.diagnostics.push_back("the diff has no hunks");
    const auto vt = sanitize(*vuln.traces);
    const auto pt = sanitize(*patched.traces);

    std::vector<HunkSignature> kept;
    for (std::size_t k = 0; k < hunks.size(); ++k) {
        const Hunk& h = hunks[k];
        HunkSignature hs;
        hs.id = "h" + std::to_string(k);
        hs.file = h.file;
        const auto old_addrs = modified_addresses(h, *vuln.linemap, HunkSide::Old);
        const auto new_addrs = modified_addresses(h, *patched.linemap, HunkSide::New);
        for (const auto& d : old_addrs.diagnostics) sf.diagnostics.push_back(hs.id + ": " + d);
        for (const auto& d : new_addrs.diagnostics) sf.diagnostics.push_back(hs.id + ": " + d);
        for (const auto& e : extract_reference(vt, old_addrs.addrs)) hs.vuln_sigs.push_back(wildcard_strings(e, tables));
        for (const auto& e : extract_reference(pt, new_addrs.addrs)) hs.patch_sigs.push_back(wildcard_strings(e, tables));
        if (hs.vuln_sigs.empty() && hs.patch_sigs.empty()) {
            sf.diagnostics.push_back(hs.id + ": no signatures on either side, hunk dropped");
            continue;
        }
        const auto pr = classify(hs.vuln_sigs, hs.patch_sigs, o);
        hs.purity = pr.purity;
        if (pr.collision)
            sf.diagnostics.push_back(hs.id + ": collision, vulnerable and patched signatures are indistinguishable");
        hs.condition_guarded = condition_guarded(hs.vuln_sigs, hs.patch_sigs, o);
        kept.push_back(std::move(hs));
    }
    std::stable_partition(kept.begin(), kept.end(), [](const HunkSignature& h) { return h.purity == Purity::Modification; });
    sf.hunks = std::move(kept);
    return sf;
}

// ---- JSON ----

inline nlohmann::json to_json(const Effect& e) {
    nlohmann::json j;
    j["kind"] = to_string(e.kind);
    j["site"] = hex(e.site);
    switch (e.kind) {
    case EffectKind::Call:
        j["name"] = e.name;
        j["params"] = nlohmann::json::array();
        for (const auto& p : e.params) j["params"].push_back(render(p));
        break;
    case EffectKind::RegWrite:
        j["reg"] = e.name;
        j["value"] = render(e.value);
        break;
    case EffectKind::MemStore:
        j["addr"] = render(e.addr);
        j["value"] = render(e.value);
        break;
    case EffectKind::Condition: j["exp"] = render(e.value); break;
    case EffectKind::Return: j["value"] = render(e.value); break;
    }
    return j;
}

inline Effect effect_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    std::string site = j.at("site").get<std::string>();
    if (site.rfind("0x", 0) == 0) site = site.substr(2);
    const std::uint64_t at = std::stoull(site, nullptr, 16);
    auto ex = [&](const char* key) { return parse_expr(j.at(key).get<std::string>()); };
    if (kind == "call") {
        std::vector<Expr> params;
        for (const auto& p : j.at("params")) params.push_back(parse_expr(p.get<std::string>()));
        return Effect::call(at, j.at("name").get<std::string>(), std::move(params));
    }
    if (kind == "regwrite") return Effect::reg_write(at, j.at("reg").get<std::string>(), ex("value"));
    if (kind == "store") return Effect::mem_store(at, ex("addr"), ex("value"));
    if (kind == "cond") return Effect::condition(at, ex("exp"));
    if (kind == "return") return Effect::ret(at, ex("value"));
    throw Error("unknown effect kind '" + kind + "'");
}

inline nlohmann::json to_json(const SignatureFile& sf) {
    nlohmann::json j;
    j["version"] = SignatureFile::kVersion;
    j["meta"] = {{"patch_id", sf.patch_id}, {"function", sf.function}, {"params", sf.params}};
    j["hunks"] = nlohmann::json::array();
    for (const auto& h : sf.hunks) {
        nlohmann::json hj;
        hj["id"] = h.id;
        hj["file"] = h.file;
        hj["purity"] = to_string(h.purity);
        hj["condition_guarded"] = h.condition_guarded;
        hj["vuln_sigs"] = nlohmann::json::array();
        for (const auto& e : h.vuln_sigs) hj["vuln_sigs"].push_back(to_json(e));
        hj["patch_sigs"] = nlohmann::json::array();
        for (const auto& e : h.patch_sigs) hj["patch_sigs"].push_back(to_json(e));
        j["hunks"].push_back(std::move(hj));
    }
    j["diagnostics"] = sf.diagnostics;
    return j;
}

inline SignatureFile signature_file_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != SignatureFile::kVersion)
            throw Error("unsupported signature file version " + j.at("version").dump());
        SignatureFile sf;
        const auto& meta = j.at("meta");
        sf.patch_id = meta.at("patch_id").get<std::string>();
        sf.function = meta.at("function").get<std::string>();
        if (meta.contains("params")) sf.params = meta.at("params");
        for (const auto& hj : j.at("hunks")) {
            HunkSignature h;
            h.id = hj.at("id").get<std::string>();
            h.file = hj.value("file", std::string{});
            h.purity = purity_from_string(hj.at("purity").get<std::string>());
            h.condition_guarded = hj.at("condition_guarded").get<bool>();
            for (const auto& e : hj.at("vuln_sigs")) h.vuln_sigs.push_back(effect_from_json(e));
            for (const auto& e : hj.at("patch_sigs")) h.patch_sigs.push_back(effect_from_json(e));
            sf.hunks.push_back(std::move(h));
        }
        if (j.contains("diagnostics")) sf.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
        return sf;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed signature file: ") + e.what());
    }
}

/// Canonical text: sorted keys, two-space indent, trailing newline.
inline std::string save(const SignatureFile& sf) { return to_json(sf).dump(2) + "\n"; }

inline SignatureFile load_signature_file(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("signature file is not JSON: ") + e.what());
    }
    return signature_file_from_json(j);
}

inline bool operator==(const HunkSignature& a, const HunkSignature& b) {
    return a.id == b.id && a.file == b.file && a.purity == b.purity && a.condition_guarded == b.condition_guarded &&
           a.vuln_sigs == b.vuln_sigs && a.patch_sigs == b.patch_sigs;
}

inline bool operator==(const SignatureFile& a, const SignatureFile& b) {
    return a.patch_id == b.patch_id && a.function == b.function && a.params == b.params && a.hunks == b.hunks &&
           a.diagnostics == b.diagnostics;
}

} // namespace patchprobe
