#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchprobe/expr.hpp"

namespace patchprobe {

enum class EffectKind : std::uint8_t { Call, RegWrite, MemStore, Condition, Return };

inline const char* to_string(EffectKind k) {
    switch (k) {
    case EffectKind::Call: return "call";
    case EffectKind::RegWrite: return "regwrite";
    case EffectKind::MemStore: return "store";
    case EffectKind::Condition: return "cond";
    case EffectKind::Return: return "return";
    }
    return "?";
}

/// One observable side effect of symbolic emulation; the unit a signature is
/// made of.
struct Effect {
    EffectKind kind = EffectKind::Return;
    std::uint64_t site = 0;
    std::string name;          // Call: callee. RegWrite: register.
    std::vector<Expr> params;  // Call
    Expr addr;                 // MemStore
    Expr value;                // RegWrite, MemStore, Return; Condition holds its expression here

    static Effect call(std::uint64_t site, std::string callee, std::vector<Expr> params) {
        Effect e;
        e.kind = EffectKind::Call, e.site = site, e.name = std::move(callee), e.params = std::move(params);
        return e;
    }
    static Effect reg_write(std::uint64_t site, std::string reg, Expr value) {
        Effect e;
        e.kind = EffectKind::RegWrite, e.site = site, e.name = std::move(reg), e.value = std::move(value);
        return e;
    }
    static Effect mem_store(std::uint64_t site, Expr addr, Expr value) {
        Effect e;
        e.kind = EffectKind::MemStore, e.site = site, e.addr = std::move(addr), e.value = std::move(value);
        return e;
    }
    static Effect condition(std::uint64_t site, Expr exp) {
        if (exp.width() != 1) throw ExprError("condition must be boolean");
        Effect e;
        e.kind = EffectKind::Condition, e.site = site, e.value = std::move(exp);
        return e;
    }
    static Effect ret(std::uint64_t site, Expr value) {
        Effect e;
        e.kind = EffectKind::Return, e.site = site, e.value = std::move(value);
        return e;
    }

    const Expr& exp() const { return value; }

    /// Every expression this effect carries, in field order.
    std::vector<Expr> exprs() const {
        std::vector<Expr> out;
        if (kind == EffectKind::Call) return params;
        if (addr) out.push_back(addr);
        if (value) out.push_back(value);
        return out;
    }
};

/// Text of the effect without its site; equal keys mean structurally equal effects.
inline std::string effect_key(const Effect& e) {
    switch (e.kind) {
    case EffectKind::Call: {
        std::string s = "call " + e.name + "(";
        for (std::size_t i = 0; i < e.params.size(); ++i) s += (i ? ", " : "") + render(e.params[i]);
        return s + ")";
    }
    case EffectKind::RegWrite: return "regwrite " + e.name + " " + render(e.value);
    case EffectKind::MemStore: return "store [" + render(e.addr) + "] " + render(e.value);
    case EffectKind::Condition: return "cond " + render(e.value);
    case EffectKind::Return: return "return " + render(e.value);
    }
    return "?";
}

inline std::string render(const Effect& e) {
    const std::string key = effect_key(e);
    const auto sp = key.find(' ');
    return key.substr(0, sp) + " " + hex(e.site) + key.substr(sp);
}

inline bool operator==(const Effect& a, const Effect& b) { return a.site == b.site && effect_key(a) == effect_key(b); }

} // namespace patchprobe
