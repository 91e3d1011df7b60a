#pragma once

// Hunk, function and binary verdicts.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "patchprobe/effect.hpp"
#include "patchprobe/error.hpp"
#include "patchprobe/match.hpp"
#include "patchprobe/signature.hpp"

namespace patchprobe {

enum class Status : std::uint8_t { Patched, Vulnerable };

inline const char* to_string(Status s) { return s == Status::Patched ? "PATCHED" : "VULNERABLE"; }

enum class Rule : std::uint8_t { Score, PureRequired, ConditionRequired, Skipped };

inline const char* to_string(Rule r) {
    switch (r) {
    case Rule::Score: return "score";
    case Rule::PureRequired: return "pure-required";
    case Rule::ConditionRequired: return "condition-required";
    case Rule::Skipped: return "skipped";
    }
    return "?";
}

struct MatchedPair {
    std::string hunk;
    std::string side;  // "vuln" or "patch"
    Effect reference;
    Effect target;
};

struct HunkVerdict {
    std::string hunk_id;
    Status status = Status::Vulnerable;
    double vuln_score = 0;
    double patch_score = 0;
    Rule rule = Rule::Score;
    std::vector<MatchedPair> evidence;
};

struct FunctionVerdict {
    std::string name;
    Status status = Status::Vulnerable;
    std::vector<HunkVerdict> hunks;
    std::vector<std::string> diagnostics;
};

struct Verdict {
    Status status = Status::Vulnerable;
    std::vector<FunctionVerdict> functions;
};

/// Greedy one-to-one matching: each reference effect, in order, consumes the
/// first unconsumed target effect it matches. Returns the summed weights.
inline double score(const std::vector<Effect>& ref, const std::vector<Effect>& target, const MatchOptions& o = {},
                    std::vector<std::pair<Effect, Effect>>* matched = nullptr) {
    std::vector<bool> used(target.size(), false);
    double total = 0;
    for (const auto& r : ref) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (used[i] || !match(r, target[i], o)) continue;
            used[i] = true;
            total += o.weights.of(r.kind);
            if (matched) matched->emplace_back(r, target[i]);
            break;
        }
    }
    return total;
}

namespace detail {

inline bool matches_any(const Effect& r, const std::vector<Effect>& target, const MatchOptions& o) {
    return std::any_of(target.begin(), target.end(), [&](const Effect& t) { return match(r, t, o); });
}

inline std::vector<Effect> required_of(const std::vector<Effect>& sigs) {
    std::vector<Effect> out;
    for (const auto& e : sigs)
        if (e.kind == EffectKind::Condition || e.kind == EffectKind::Call) out.push_back(e);
    return out;
}

inline void record(HunkVerdict& hv, const char* side, const std::vector<std::pair<Effect, Effect>>& pairs) {
    for (const auto& [r, t] : pairs) hv.evidence.push_back({hv.hunk_id, side, r, t});
}

} // namespace detail

inline HunkVerdict decide_hunk(const HunkSignature& hs, const std::vector<Effect>& target, const MatchOptions& o = {}) {
    HunkVerdict hv;
    hv.hunk_id = hs.id;
    if (hs.vuln_sigs.empty() && hs.patch_sigs.empty()) {
        hv.rule = Rule::Skipped;
        return hv;
    }
    std::vector<std::pair<Effect, Effect>> vm, pm;
    hv.vuln_score = score(hs.vuln_sigs, target, o, &vm);
    hv.patch_score = score(hs.patch_sigs, target, o, &pm);
    detail::record(hv, "vuln", vm);
    detail::record(hv, "patch", pm);

    if (hs.condition_guarded) {
        bool found = false;
        for (const auto& p : hs.patch_sigs)
            if (p.kind == EffectKind::Condition && detail::matches_any(p, target, o)) {
                found = true;
                break;
            }
        if (!found) {
            hv.status = Status::Vulnerable;
            hv.rule = Rule::ConditionRequired;
            return hv;
        }
    }
    if (hs.purity == Purity::PureAddition || hs.purity == Purity::PureDeletion) {
        const auto required = detail::required_of(hs.purity == Purity::PureAddition ? hs.patch_sigs : hs.vuln_sigs);
        // With nothing to require the rule says nothing; the scores decide.
        if (!required.empty()) {
            const bool all = std::all_of(required.begin(), required.end(),
                                         [&](const Effect& r) { return detail::matches_any(r, target, o); });
            hv.rule = Rule::PureRequired;
            if (hs.purity == Purity::PureAddition)
                hv.status = all ? Status::Patched : Status::Vulnerable;
            else
                hv.status = all ? Status::Vulnerable : Status::Patched;
            return hv;
        }
    }
    hv.rule = Rule::Score;
    hv.status = hv.vuln_score >= hv.patch_score ? Status::Vulnerable : Status::Patched;
    return hv;
}

/// Decides every hunk of `hunks` against one target function.
inline FunctionVerdict decide_function(const std::string& name, const std::vector<const HunkSignature*>& hunks,
                                       const std::vector<Effect>& target, const MatchOptions& o = {}) {
    FunctionVerdict fv;
    fv.name = name;
    bool any = false;
    bool all_patched = true;
    for (const auto* h : hunks) {
        HunkVerdict hv = decide_hunk(*h, target, o);
        if (hv.rule == Rule::Skipped) {
            fv.diagnostics.push_back("hunk " + h->id + " has no signatures and was skipped");
        } else {
            any = true;
            all_patched = all_patched && hv.status == Status::Patched;
        }
        fv.hunks.push_back(std::move(hv));
    }
    if (!any) {
        fv.diagnostics.push_back("no hunk could be decided; reporting vulnerable");
        fv.status = Status::Vulnerable;
    } else {
        fv.status = all_patched ? Status::Patched : Status::Vulnerable;
    }
    return fv;
}

/// Binary verdict over all affected functions. Signature files naming the
/// same function contribute hunks to one function verdict.
inline Verdict decide_binary(const std::vector<SignatureFile>& files,
                             const std::map<std::string, std::vector<Effect>>& target_functions, const MatchOptions& o = {}) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const HunkSignature*>> by_function;
    for (const auto& sf : files) {
        if (!target_functions.count(sf.function)) throw MissingFunctionError(sf.function);
        if (!by_function.count(sf.function)) order.push_back(sf.function);
        auto& v = by_function[sf.function];
        for (const auto& h : sf.hunks) v.push_back(&h);
    }
    Verdict v;
    bool all_patched = true;
    for (const auto& name : order) {
        v.functions.push_back(decide_function(name, by_function[name], target_functions.at(name), o));
        all_patched = all_patched && v.functions.back().status == Status::Patched;
    }
    // No affected function means nothing was shown to be patched.
    v.status = !order.empty() && all_patched ? Status::Patched : Status::Vulnerable;
    return v;
}

inline nlohmann::json to_json(const Verdict& v) {
    nlohmann::json j;
    j["verdict"] = to_string(v.status);
    j["functions"] = nlohmann::json::array();
    nlohmann::json evidence = nlohmann::json::array();
    for (const auto& f : v.functions) {
        nlohmann::json fj;
        fj["name"] = f.name;
        fj["verdict"] = to_string(f.status);
        fj["diagnostics"] = f.diagnostics;
        fj["hunks"] = nlohmann::json::array();
        for (const auto& h : f.hunks) {
            fj["hunks"].push_back({{"id", h.hunk_id},
                                   {"verdict", to_string(h.status)},
                                   {"vuln_score", h.vuln_score},
                                   {"patch_score", h.patch_score},
                                   {"rule", to_string(h.rule)}});
            for (const auto& m : h.evidence)
                evidence.push_back({{"function", f.name},
                                    {"hunk", m.hunk},
                                    {"side", m.side},
                                    {"reference", render(m.reference)},
                                    {"target", render(m.target)}});
        }
        j["functions"].push_back(std::move(fj));
    }
    j["evidence"] = std::move(evidence);
    return j;
}

inline std::string render_table(const Verdict& v) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %-6s %-10s %8s %8s  %s\n", "function", "hunk", "verdict", "vuln", "patch", "rule");
    out += buf;
    for (const auto& f : v.functions) {
        for (const auto& h : f.hunks) {
            std::snprintf(buf, sizeof buf, "%-24s %-6s %-10s %8.2f %8.2f  %s\n", f.name.c_str(), h.hunk_id.c_str(),
                          to_string(h.status), h.vuln_score, h.patch_score, to_string(h.rule));
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%-24s %-6s %-10s\n", f.name.c_str(), "-", to_string(f.status));
        out += buf;
    }
    out += std::string("binary: ") + to_string(v.status) + "\n";
    return out;
}

} // namespace patchprobe
