#pragma once

// Per-signature matching.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "patchprobe/effect.hpp"
#include "patchprobe/emulator.hpp"
#include "patchprobe/equiv.hpp"
#include "patchprobe/error.hpp"

namespace patchprobe {

struct MatchWeights {
    double call = 3;
    double condition = 3;
    double reg_write = 1;
    double mem_store = 1;
    double ret = 1;

    double of(EffectKind k) const {
        switch (k) {
        case EffectKind::Call: return call;
        case EffectKind::Condition: return condition;
        case EffectKind::RegWrite: return reg_write;
        case EffectKind::MemStore: return mem_store;
        case EffectKind::Return: return ret;
        }
        return 0;
    }

    /// Calls and conditions weigh the same and no less than anything else.
    void validate() const {
        for (double w : {call, condition, reg_write, mem_store, ret})
            if (!(w > 0)) throw Error("match weights must be positive");
        if (call != condition) throw Error("call and condition weights must be equal");
        if (call < reg_write || call < mem_store || call < ret)
            throw Error("call and condition weights must not be below the other weights");
    }
};

/// Parses `c=3,r=1` style overrides on top of the defaults. `c` sets both
/// call and condition; `r`, `m` and `t` set register-write, memory-store and
/// return. Long names call, cond, regwrite, store and return are accepted too.
inline MatchWeights parse_weights(std::string_view text, MatchWeights w = {}) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view item = text.substr(pos, end - pos);
        pos = end + 1;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw Error("weight '" + std::string(item) + "' lacks '='");
        const std::string key(item.substr(0, eq));
        double v = 0;
        try {
            std::size_t used = 0;
            v = std::stod(std::string(item.substr(eq + 1)), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error("weight '" + std::string(item) + "' is not a number");
        }
        if (key == "c") {
            w.call = w.condition = v;
        } else if (key == "call") {
            w.call = v;
        } else if (key == "cond") {
            w.condition = v;
        } else if (key == "r" || key == "regwrite") {
            w.reg_write = v;
        } else if (key == "m" || key == "store") {
            w.mem_store = v;
        } else if (key == "t" || key == "return") {
            w.ret = v;
        } else {
            throw Error("unknown weight '" + key + "'");
        }
    }
    w.validate();
    return w;
}

struct MatchOptions {
    MatchWeights weights{};
    /// Compare frame-relative stores by value only.
    bool stack_offset_insensitive = false;
    /// Equivalence oracle; the thread's default BuiltinOracle when null.
    EquivalenceOracle* oracle = nullptr;
};

namespace detail {

inline bool expr_equal(const Expr& a, const Expr& b, const MatchOptions& o) {
    if (a.is_wildcard() || b.is_wildcard()) return true;
    if (a.width() != b.width()) return false;
    if (a == b) return true;
    return o.oracle ? o.oracle->check(a, b).equal : equiv(a, b);
}

struct RetSymbol {
    std::string name;
    unsigned index;
};

/// Splits `RET(name,k)` into its parts.
inline std::optional<RetSymbol> ret_symbol(const Expr& e) {
    if (!e || !e.is_sym()) return std::nullopt;
    const std::string& n = e.name();
    if (n.rfind("RET(", 0) != 0 || n.back() != ')') return std::nullopt;
    const auto comma = n.rfind(',');
    if (comma == std::string::npos || comma < 4) return std::nullopt;
    return RetSymbol{n.substr(4, comma - 4), static_cast<unsigned>(std::stoul(n.substr(comma + 1, n.size() - comma - 2)))};
}

/// Callees without a symbol-table name are lifted as `sub_<addr>`.
inline bool anonymous_callee(const std::string& name) { return name.rfind("sub_", 0) == 0; }

inline bool frame_relative(const Expr& addr) { return stack_offset(addr).has_value(); }

} // namespace detail

/// True when `a` and `b` describe the same side effect. Wildcards (reference
/// side only) match any parameter.
inline bool match(const Effect& a, const Effect& b, const MatchOptions& o = {}) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case EffectKind::Call:
        if (a.name != b.name || a.params.size() != b.params.size()) return false;
        for (std::size_t i = 0; i < a.params.size(); ++i)
            if (!detail::expr_equal(a.params[i], b.params[i], o)) return false;
        return true;
    case EffectKind::RegWrite: return a.name == b.name && detail::expr_equal(a.value, b.value, o);
    case EffectKind::MemStore:
        if (o.stack_offset_insensitive && detail::frame_relative(a.addr) && detail::frame_relative(b.addr))
            return detail::expr_equal(a.value, b.value, o);
        return detail::expr_equal(a.addr, b.addr, o) && detail::expr_equal(a.value, b.value, o);
    case EffectKind::Condition: return detail::expr_equal(a.value, b.value, o);
    case EffectKind::Return: {
        const auto ra = detail::ret_symbol(a.value);
        const auto rb = detail::ret_symbol(b.value);
        if (ra && rb) {
            if (ra->name == rb->name) return true;
            if (detail::anonymous_callee(ra->name) || detail::anonymous_callee(rb->name)) return ra->index == rb->index;
            return false;
        }
        if (ra || rb) return false;
        return detail::expr_equal(a.value, b.value, o);
    }
    }
    return false;
}

} // namespace patchprobe
