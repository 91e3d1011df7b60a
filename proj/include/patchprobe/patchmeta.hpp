#pragma once

// Unified diffs, address-to-line maps and the call side tables.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "patchprobe/error.hpp"
#include "patchprobe/expr.hpp"
#include "patchprobe/mir.hpp"

namespace patchprobe {

enum class HunkKind : std::uint8_t { Modification, PureAddText, PureDelText };

inline const char* to_string(HunkKind k) {
    switch (k) {
    case HunkKind::Modification: return "modification";
    case HunkKind::PureAddText: return "pure-add-text";
    case HunkKind::PureDelText: return "pure-del-text";
    }
    return "?";
}

struct Hunk {
    std::string file;
    std::size_t old_start = 0, old_len = 0;
    std::size_t new_start = 0, new_len = 0;
    std::set<std::size_t> deleted;  // old-file line numbers
    std::set<std::size_t> added;    // new-file line numbers
    HunkKind kind = HunkKind::Modification;
    std::string section;             // text after the closing @@
    std::vector<std::string> body;   // raw body lines, prefix included
};

namespace detail {

inline std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view l = text.substr(pos, nl - pos);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        out.push_back(l);
        pos = nl + 1;
    }
    return out;
}

inline std::string diff_path(std::string_view s) {
    if (const auto tab = s.find('\t'); tab != std::string_view::npos) s = s.substr(0, tab);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.rfind("a/", 0) == 0 || s.rfind("b/", 0) == 0) s.remove_prefix(2);
    return std::string(s);
}

/// Parses `a[,b]` from a hunk header range.
inline std::pair<std::size_t, std::size_t> hunk_range(std::string_view s, std::size_t line_no) {
    auto number = [&](std::string_view t) {
        if (t.empty() || t.find_first_not_of("0123456789") != std::string_view::npos)
            throw ParseError(line_no, 1, "malformed hunk header");
        return static_cast<std::size_t>(std::stoull(std::string(t)));
    };
    const auto comma = s.find(',');
    if (comma == std::string_view::npos) return {number(s), 1};
    return {number(s.substr(0, comma)), number(s.substr(comma + 1))};
}

} // namespace detail

/// Hunks in file order. Lines outside hunks (`diff --git`, `index`, ...) are ignored.
inline std::vector<Hunk> parse_diff(std::string_view source) {
    std::vector<Hunk> out;
    std::string file;
    const auto lines = detail::lines_of(source);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view l = lines[i];
        const std::size_t line_no = i + 1;
        if (l.rfind("--- ", 0) == 0) {
            const std::string p = detail::diff_path(l.substr(4));
            if (p != "/dev/null") file = p;
            continue;
        }
        if (l.rfind("+++ ", 0) == 0) {
            const std::string p = detail::diff_path(l.substr(4));
            if (p != "/dev/null") file = p;
            continue;
        }
        if (l.rfind("@@", 0) != 0) continue;

        // @@ -a,b +c,d @@ section
        if (l.size() < 4 || l.substr(0, 4) != "@@ -") throw ParseError(line_no, 1, "malformed hunk header");
        const auto close = l.find(" @@", 3);
        if (close == std::string_view::npos) throw ParseError(line_no, 1, "malformed hunk header");
        const std::string_view ranges = l.substr(4, close - 4);
        const auto space = ranges.find(" +");
        if (space == std::string_view::npos) throw ParseError(line_no, 1, "malformed hunk header");
        Hunk h;
        h.file = file;
        std::tie(h.old_start, h.old_len) = detail::hunk_range(ranges.substr(0, space), line_no);
        std::tie(h.new_start, h.new_len) = detail::hunk_range(ranges.substr(space + 2), line_no);
        if (close + 3 < l.size()) h.section = std::string(l.substr(close + 3));

        std::size_t old_line = h.old_start, new_line = h.new_start;
        std::size_t old_seen = 0, new_seen = 0;
        while (old_seen < h.old_len || new_seen < h.new_len) {
            if (++i >= lines.size()) throw ParseError(line_no, 1, "hunk body is shorter than its header says");
            const std::string_view b = lines[i];
            if (!b.empty() && b[0] == '\\') {
                h.body.emplace_back(b);
                continue;
            }
            const char tag = b.empty() ? ' ' : b[0];
            if (tag == ' ') {
                ++old_line, ++new_line, ++old_seen, ++new_seen;
            } else if (tag == '-') {
                h.deleted.insert(old_line++);
                ++old_seen;
            } else if (tag == '+') {
                h.added.insert(new_line++);
                ++new_seen;
            } else {
                throw ParseError(i + 1, 1, "unexpected line in hunk body");
            }
            if (old_seen > h.old_len || new_seen > h.new_len) throw ParseError(i + 1, 1, "hunk body is longer than its header says");
            h.body.emplace_back(b);
        }
        while (i + 1 < lines.size() && !lines[i + 1].empty() && lines[i + 1][0] == '\\') h.body.emplace_back(lines[++i]);
        if (h.deleted.empty() && h.added.empty()) throw ParseError(line_no, 1, "hunk changes no lines");
        h.kind = h.deleted.empty() ? HunkKind::PureAddText : h.added.empty() ? HunkKind::PureDelText : HunkKind::Modification;
        out.push_back(std::move(h));
    }
    return out;
}

inline std::string render(const std::vector<Hunk>& hunks) {
    std::string out;
    std::string file;
    bool first = true;
    auto range = [](std::size_t s, std::size_t n) { return std::to_string(s) + "," + std::to_string(n); };
    for (const auto& h : hunks) {
        if (first || h.file != file) {
            out += "--- a/" + h.file + "\n+++ b/" + h.file + "\n";
            file = h.file;
            first = false;
        }
        out += "@@ -" + range(h.old_start, h.old_len) + " +" + range(h.new_start, h.new_len) + " @@" + h.section + "\n";
        for (const auto& b : h.body) out += b + "\n";
    }
    return out;
}

/// Which reference build a line map describes.
enum class BinaryRole : std::uint8_t { Vulnerable, Patched };

inline const char* to_string(BinaryRole r) { return r == BinaryRole::Vulnerable ? "vulnerable" : "patched"; }

struct LineMap {
    BinaryRole role = BinaryRole::Vulnerable;
    std::map<std::uint64_t, std::size_t> entries;
};

/// Lines of `<hex-addr> <decimal-line>`; `#` starts a comment.
inline LineMap parse_linemap(std::string_view text, BinaryRole role) {
    LineMap lm;
    lm.role = role;
    const auto lines = detail::lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view l = lines[i];
        if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
        detail::LineCursor cur(l, i + 1);
        if (cur.done()) continue;
        const std::uint64_t addr = cur.hex_number();
        const std::size_t line = cur.decimal();
        if (!cur.done()) cur.fail("trailing text");
        if (!lm.entries.emplace(addr, line).second) throw ParseError(i + 1, 1, "address " + hex(addr) + " mapped twice");
    }
    return lm;
}

struct AddressSet {
    std::set<std::uint64_t> addrs;
    std::vector<std::string> diagnostics;
};

enum class HunkSide : std::uint8_t { Old, New };

/// Addresses whose line is deleted (old side, vulnerable map) or added (new
/// side, patched map) by `h`.
inline AddressSet modified_addresses(const Hunk& h, const LineMap& lm, HunkSide side) {
    const BinaryRole want = side == HunkSide::Old ? BinaryRole::Vulnerable : BinaryRole::Patched;
    if (lm.role != want)
        throw Error(std::string("the ") + (side == HunkSide::Old ? "old" : "new") + " side of a hunk needs the " + to_string(want) +
                    " line map, got the " + to_string(lm.role) + " one");
    const auto& lines = side == HunkSide::Old ? h.deleted : h.added;
    AddressSet out;
    std::set<std::size_t> mapped;
    for (const auto& [addr, line] : lm.entries)
        if (lines.count(line)) {
            out.addrs.insert(addr);
            mapped.insert(line);
        }
    std::string missing;
    for (std::size_t l : lines)
        if (!mapped.count(l)) missing += (missing.empty() ? "" : ", ") + std::to_string(l);
    if (!missing.empty())
        out.diagnostics.push_back(std::string(side == HunkSide::Old ? "deleted" : "added") + " lines " + missing + " of " + h.file +
                                  " have no addresses in the " + to_string(lm.role) + " line map");
    return out;
}

/// Instruction addresses of `f` that `lm` does not map.
inline std::vector<std::uint64_t> unmapped_addresses(const LineMap& lm, const MirFunction& f) {
    std::set<std::uint64_t> seen;
    std::vector<std::uint64_t> out;
    for (const auto& i : f.instrs)
        if (seen.insert(i.addr).second && !lm.entries.count(i.addr)) out.push_back(i.addr);
    return out;
}

struct SideTables {
    std::map<std::string, unsigned> call_arity;
    std::set<std::uint64_t> string_addrs;
    std::set<std::pair<std::string, unsigned>> string_args;

    bool is_string_arg(const std::string& fn, unsigned index) const { return string_args.count({fn, index}) > 0; }
};

inline SideTables parse_side_tables(std::string_view text) {
    SideTables t;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, e.byte, std::string("side tables: ") + e.what());
    }
    if (!j.is_object()) throw Error("side tables must be a JSON object");
    try {
        if (j.contains("call_arity")) {
            for (const auto& [name, n] : j.at("call_arity").items()) {
                const int v = n.get<int>();
                if (v < 0 || v > 6) throw Error("call arity of " + name + " must be within 0..6");
                t.call_arity[name] = static_cast<unsigned>(v);
            }
        }
        if (j.contains("string_addrs")) {
            for (const auto& a : j.at("string_addrs")) {
                if (a.is_string()) {
                    std::string s = a.get<std::string>();
                    if (s.rfind("0x", 0) == 0) s = s.substr(2);
                    t.string_addrs.insert(std::stoull(s, nullptr, 16));
                } else {
                    t.string_addrs.insert(a.get<std::uint64_t>());
                }
            }
        }
        if (j.contains("string_args")) {
            for (const auto& p : j.at("string_args")) {
                if (!p.is_array() || p.size() != 2) throw Error("string_args entries are [function, index] pairs");
                const int idx = p[1].get<int>();
                if (idx < 0 || idx > 5) throw Error("string argument index must be within 0..5");
                t.string_args.emplace(p[0].get<std::string>(), static_cast<unsigned>(idx));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("side tables: ") + e.what());
    }
    return t;
}

inline nlohmann::json to_json(const SideTables& t) {
    nlohmann::json j = nlohmann::json::object();
    j["call_arity"] = nlohmann::json::object();
    for (const auto& [n, k] : t.call_arity) j["call_arity"][n] = k;
    j["string_addrs"] = nlohmann::json::array();
    for (auto a : t.string_addrs) j["string_addrs"].push_back(hex(a));
    j["string_args"] = nlohmann::json::array();
    for (const auto& [f, i] : t.string_args) j["string_args"].push_back({f, i});
    return j;
}

} // namespace patchprobe
