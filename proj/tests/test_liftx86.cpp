#include <gtest/gtest.h>

#include <map>
#include <random>

#include "patchprobe/liftx86.hpp"

using namespace patchprobe;

namespace {

MirFunction lift_one(const std::string& text, const std::map<std::string, unsigned>* arity = nullptr) {
    const auto ls = parse_listing(text);
    EXPECT_EQ(ls.size(), 1u);
    return lift(ls.at(0), arity);
}

// Concrete MIR interpreter, written against the instruction semantics only.
struct Machine {
    std::array<std::uint64_t, 18> regs{};
    std::map<std::uint64_t, std::uint64_t> mem;

    std::uint64_t get(Reg r) const { return r.low32 ? regs[r.id] & 0xffffffffu : regs[r.id]; }
    void set(Reg r, std::uint64_t v) { regs[r.id] = r.low32 ? v & 0xffffffffu : v; }
    std::uint64_t val(const Operand& o, unsigned w) const {
        const std::uint64_t m = w == 64 ? ~0ull : 0xffffffffull;
        return (o.is_imm ? static_cast<std::uint64_t>(o.imm) : get(o.reg)) & m;
    }

    static bool rel(Rel r, std::uint64_t a, std::uint64_t b, unsigned w) {
        const std::int64_t sa = w == 64 ? static_cast<std::int64_t>(a) : static_cast<std::int32_t>(a);
        const std::int64_t sb = w == 64 ? static_cast<std::int64_t>(b) : static_cast<std::int32_t>(b);
        switch (r) {
        case Rel::Eq: return a == b;
        case Rel::Ne: return a != b;
        case Rel::Slt: return sa < sb;
        case Rel::Sle: return sa <= sb;
        case Rel::Sgt: return sa > sb;
        case Rel::Sge: return sa >= sb;
        case Rel::Ult: return a < b;
        case Rel::Ule: return a <= b;
        }
        return false;
    }

    /// Runs to `ret` and returns the value of the return register.
    std::uint64_t run(const MirFunction& f) {
        std::map<std::uint64_t, std::size_t> at;
        for (std::size_t k = f.instrs.size(); k-- > 0;) at[f.instrs[k].addr] = k;
        std::size_t pc = 0;
        for (int guard = 0; guard < 10000; ++guard) {
            const MirInstr& i = f.instrs.at(pc);
            const unsigned w = i.dst.low32 ? 32 : 64;
            const std::uint64_t m = w == 64 ? ~0ull : 0xffffffffull;
            switch (i.op) {
            case Opcode::Mov: set(i.dst, val(i.src, w)); break;
            case Opcode::Alu: {
                const std::uint64_t a = get(i.a), b = val(i.src, w);
                std::uint64_t r = 0;
                switch (i.alu) {
                case BinOpKind::Add: r = a + b; break;
                case BinOpKind::Sub: r = a - b; break;
                case BinOpKind::Mul: r = a * b; break;
                case BinOpKind::And: r = a & b; break;
                case BinOpKind::Or: r = a | b; break;
                case BinOpKind::Xor: r = a ^ b; break;
                case BinOpKind::Shl: r = b >= w ? 0 : a << b; break;
                case BinOpKind::Shr: r = b >= w ? 0 : (a & m) >> b; break;
                case BinOpKind::Sar: {
                    const std::int64_t s = w == 64 ? static_cast<std::int64_t>(a) : static_cast<std::int32_t>(a);
                    r = static_cast<std::uint64_t>(s >> (b >= w ? w - 1 : b));
                    break;
                }
                }
                set(i.dst, r & m);
                break;
            }
            case Opcode::Load: set(i.dst, mem[get(i.base) + static_cast<std::uint64_t>(i.offset)] & m); break;
            case Opcode::Store: {
                const unsigned sw = i.src.is_imm ? 64 : i.src.reg.width();
                mem[get(i.base) + static_cast<std::uint64_t>(i.offset)] = val(i.src, sw);
                break;
            }
            case Opcode::Br: {
                const unsigned bw = i.a.width();
                pc = at.at(rel(i.rel, get(i.a), val(i.src, bw), bw) ? i.taken : i.fall);
                continue;
            }
            case Opcode::Jmp: pc = at.at(i.taken); continue;
            case Opcode::Call: set(f.return_reg, 0xca11); break;
            case Opcode::Ret: return get(f.return_reg);
            }
            ++pc;
        }
        ADD_FAILURE() << "interpreter did not terminate";
        return 0;
    }
};

// x86 flags after `cmp src, dst` (dst - src) or `test src, dst` (dst & src).
struct Flags {
    bool zf, sf, cf, of;
};

Flags cmp_flags(std::uint64_t dst, std::uint64_t src, unsigned w) {
    const std::uint64_t m = w == 64 ? ~0ull : 0xffffffffull, msb = 1ull << (w - 1);
    dst &= m, src &= m;
    const std::uint64_t r = (dst - src) & m;
    return {r == 0, (r & msb) != 0, dst < src, (((dst ^ src) & (dst ^ r)) & msb) != 0};
}

Flags test_flags(std::uint64_t dst, std::uint64_t src, unsigned w) {
    const std::uint64_t m = w == 64 ? ~0ull : 0xffffffffull, msb = 1ull << (w - 1);
    const std::uint64_t r = dst & src & m;
    return {r == 0, (r & msb) != 0, false, false};
}

bool jcc_taken(const std::string& j, Flags f) {
    if (j == "je" || j == "jz") return f.zf;
    if (j == "jne" || j == "jnz") return !f.zf;
    if (j == "jl" || j == "jnge") return f.sf != f.of;
    if (j == "jle" || j == "jng") return f.zf || f.sf != f.of;
    if (j == "jg" || j == "jnle") return !f.zf && f.sf == f.of;
    if (j == "jge" || j == "jnl") return f.sf == f.of;
    if (j == "jb" || j == "jc" || j == "jnae") return f.cf;
    if (j == "jbe" || j == "jna") return f.cf || f.zf;
    if (j == "ja" || j == "jnbe") return !f.cf && !f.zf;
    if (j == "jae" || j == "jnb" || j == "jnc") return !f.cf;
    ADD_FAILURE() << "no flag rule for " << j;
    return false;
}

const std::vector<std::string> kJccs = {"je",  "jz",   "jne", "jnz", "jl", "jnge", "jle", "jng", "jg",  "jnle", "jge",
                                        "jnl", "jb",   "jc",  "jnae", "jbe", "jna", "ja", "jnbe", "jae", "jnb", "jnc"};

std::string branch_listing(const std::string& prologue, const std::string& compare, const std::string& jcc) {
    return "0000000000001000 <f>:\n" + prologue + "    1010:\t" + compare + "\n    1014:\t" + jcc +
           "    1030 <f+0x30>\n    1016:\tmov    $0x0,%eax\n    101b:\tret\n    1030:\tmov    $0x1,%eax\n    1035:\tret\n";
}

std::vector<std::uint64_t> samples(std::mt19937_64& rng) {
    std::vector<std::uint64_t> v = {0, 1, 2, 3, ~0ull, ~0ull - 1, 0x7fffffffull, 0x80000000ull, 0xffffffffull,
                                    0x7fffffffffffffffull, 0x8000000000000000ull, 0x100000000ull, 0xfffffffeull};
    for (int i = 0; i < 12; ++i) v.push_back(rng() >> (rng() % 64));
    return v;
}

} // namespace

TEST(ListingParse, MinimalWithBytes) {
    const auto ls = parse_listing("0000000000001130 <f>:\n 1130: c3 ret");
    ASSERT_EQ(ls.size(), 1u);
    EXPECT_EQ(ls[0].name, "f");
    ASSERT_EQ(ls[0].lines.size(), 1u);
    EXPECT_EQ(ls[0].lines[0].mnemonic, "ret");
    EXPECT_EQ(ls[0].lines[0].addr, 0x1130u);
}

TEST(ListingParse, ObjdumpTabsAndComments) {
    const auto ls = parse_listing(
        "\nt.o:     file format elf64-x86-64\n\nDisassembly of section .text:\n\n"
        "0000000000001189 <g>:\n"
        "    1189:\tf3 0f 1e fa          \tendbr64\n"
        "    118d:\t83 7d ec 02          \tcmpl   $0x2,-0x14(%rbp)\n"
        "    1191:\t48 8d 05 6c 0e 00 00 \tlea    0xe6c(%rip),%rax        # 2004 <_IO_stdin_used+0x4>\n"
        "    1198:\t48 89 c7             \tmov    %rax,%rdi\n"
        "    119b:\te8 00 00 00 00       \tcall   11a0 <puts@plt>\n");
    ASSERT_EQ(ls.size(), 1u);
    const auto& l = ls[0].lines;
    ASSERT_EQ(l.size(), 5u);
    EXPECT_EQ(l[1].mnemonic, "cmpl");
    EXPECT_EQ(l[1].operands, "$0x2,-0x14(%rbp)");
    EXPECT_EQ(l[2].comment, "2004 <_IO_stdin_used+0x4>");
    EXPECT_EQ(l[4].operands, "11a0 <puts@plt>");
}

TEST(ListingParse, CompareOperandsSplit) {
    const auto fn = lift_one(branch_listing("", "cmpl   $0x2,-0x14(%rbp)", "jle"));
    EXPECT_EQ(fn.instrs[0].op, Opcode::Load);
}

TEST(ListingParse, GarbageAddressNamesTheLine) {
    try {
        parse_listing("0000000000001130 <f>:\n 1130: ret\n 11zz: ret\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_listing(" 1130: ret\n"), ParseError);
    EXPECT_THROW(parse_listing("0000000000001130 <f>:\n 1134: nop\n 1130: ret\n"), ParseError);
}

TEST(Lift, SpillOfSecondArgument) {
    const auto f = lift_one("0000000000000000 <f>:\n 0: mov    %esi,-0x14(%rbp)\n 3: ret\n");
    ASSERT_EQ(f.instrs.size(), 2u);
    EXPECT_EQ(render(f.instrs[0]), "0x0: store [fp + #-20], r1d");
}

TEST(Lift, CompareAndJumpFuse) {
    const auto f = lift_one(
        "0000000000000000 <f>:\n 0: cmpl   $0x2,-0x14(%rbp)\n 4: jle    20 <f+0x20>\n 6: ret\n 20: ret\n");
    ASSERT_EQ(f.instrs.size(), 4u);
    const auto& ld = f.instrs[0];
    const auto& br = f.instrs[1];
    ASSERT_EQ(ld.op, Opcode::Load);
    EXPECT_EQ(ld.base, Reg::fp());
    EXPECT_EQ(ld.offset, -20);
    EXPECT_TRUE(ld.dst.low32);
    EXPECT_GE(ld.dst.id, x86::kTempFirst);
    EXPECT_LE(ld.dst.id, x86::kTempLast);
    EXPECT_EQ(br, MirInstr::br(0x0, Rel::Sle, ld.dst, Operand::immediate(2), 0x20, 0x6));
}

TEST(Lift, TestSameRegisterFusesToZeroCompare) {
    const auto f = lift_one("0000000000000000 <f>:\n 0: test   %rax,%rax\n 3: je     9 <f+0x9>\n 5: ret\n 9: ret\n");
    ASSERT_EQ(f.instrs.size(), 3u);
    EXPECT_EQ(f.instrs[0], MirInstr::br(0x0, Rel::Eq, Reg::gpr(6), Operand::immediate(0), 0x9, 0x5));
}

TEST(Lift, Ret) {
    const auto f = lift_one("0000000000000000 <f>:\n 0: ret\n");
    ASSERT_EQ(f.instrs.size(), 1u);
    EXPECT_EQ(f.instrs[0].op, Opcode::Ret);
    EXPECT_EQ(f.return_reg, Reg::gpr(x86::kReturnReg));
}

TEST(Lift, RegisterTableFollowsArgumentOrder) {
    const char* args[] = {"rdi", "rsi", "rdx", "rcx", "r8", "r9"};
    for (unsigned i = 0; i < 6; ++i) {
        const auto r = x86::lookup_register(args[i]);
        ASSERT_TRUE(r);
        EXPECT_EQ(r->reg, Reg::gpr(i));
        EXPECT_EQ(r->bits, 64u);
    }
    EXPECT_EQ(x86::lookup_register("rbp")->reg, Reg::fp());
    EXPECT_EQ(x86::lookup_register("rsp")->reg, Reg::sp());
    EXPECT_EQ(x86::lookup_register("esi")->reg, Reg::gpr(1, true));
    EXPECT_EQ(x86::lookup_register("esi")->bits, 32u);
    EXPECT_EQ(x86::lookup_register("r8d")->bits, 32u);
    EXPECT_FALSE(x86::lookup_register("xmm0"));
}

TEST(Lift, CallArityFromSideTable) {
    const std::string text = "0000000000000000 <f>:\n 0: call   1070 <av_pix_fmt_desc_get@plt>\n 5: call   2000\n a: call   1150 <g+0x10>\n f: ret\n";
    const std::map<std::string, unsigned> arity{{"av_pix_fmt_desc_get", 1}};
    const auto f = lift_one(text, &arity);
    EXPECT_EQ(f.instrs[0], MirInstr::call(0x0, "av_pix_fmt_desc_get", 1));
    EXPECT_EQ(f.instrs[1], MirInstr::call(0x5, "sub_2000", 6));
    EXPECT_EQ(f.instrs[2], MirInstr::call(0xa, "sub_1150", 6));
    EXPECT_EQ(lift_one(text).instrs[0].nargs, 6u);
}

TEST(Lift, PushPopAndLeaveKeepTheFrameBalanced) {
    const auto f = lift_one(
        "0000000000000000 <f>:\n 0: push   %rbp\n 1: mov    %rsp,%rbp\n 4: push   %rbx\n 5: sub    $0x18,%rsp\n"
        " 9: mov    $0x7,%ebx\n e: mov    %rbx,-0x20(%rbp)\n 12: add    $0x18,%rsp\n 16: pop    %rbx\n 17: leave\n 18: ret\n");
    Machine m;
    m.regs[Reg::kSp] = 0x10000;
    m.regs[Reg::kFp] = 0xdead;
    m.regs[7] = 0xb0b;
    m.run(f);
    EXPECT_EQ(m.regs[Reg::kSp], 0x10000u);
    EXPECT_EQ(m.regs[Reg::kFp], 0xdeadu);
    EXPECT_EQ(m.regs[7], 0xb0bu);
    EXPECT_EQ(m.mem[0x10000 - 8 - 0x20], 7u);
}

TEST(Lift, LeaForms) {
    const auto f = lift_one(
        "0000000000000000 <f>:\n 0: lea    0x8(%rdi),%rax\n 4: lea    (%rdi,%rsi,4),%rdx\n 8: lea    -0x1(%rsi,%rsi,2),%esi\n"
        " c: lea    0xe6c(%rip),%rcx        # 2004 <s>\n 13: ret\n");
    Machine m;
    m.regs[0] = 100;
    m.regs[1] = 0x1'0000'0003ull;
    m.run(f);
    EXPECT_EQ(m.regs[6], 108u);
    EXPECT_EQ(m.regs[2], 100u + 4 * 0x1'0000'0003ull);
    EXPECT_EQ(m.regs[1], (3 * 0x1'0000'0003ull - 1) & 0xffffffffu);
    EXPECT_EQ(m.regs[3], 0x2004u);
}

TEST(Lift, ArithmeticMatchesX86) {
    const auto f = lift_one(
        "0000000000000000 <f>:\n 0: mov    %edi,%eax\n 2: add    %eax,%eax\n 4: add    $0x1f,%eax\n 7: and    $0xffffffe0,%eax\n"
        " a: imul   $0x3,%eax,%edx\n d: sar    %edx\n f: shl    $0x4,%rdx\n 13: movslq %edx,%rcx\n 16: movzbl %cl,%r8d\n"
        " 1a: xor    %r9d,%r9d\n 1d: incl   -0x8(%rbp)\n 20: ret\n");
    Machine m;
    m.regs[0] = 0xffff'ffff'0000'0011ull;  // only edi is read
    m.regs[Reg::kFp] = 0x5000;
    m.mem[0x5000 - 8] = 41;
    m.regs[5] = 77;
    m.run(f);
    const std::uint32_t eax = ((0x11u * 2 + 0x1f) & 0xffffffe0u);
    EXPECT_EQ(m.regs[6], eax);
    const std::uint32_t edx = static_cast<std::uint32_t>(static_cast<std::int32_t>(eax * 3) >> 1);
    const std::uint64_t rdx = static_cast<std::uint64_t>(edx) << 4;
    EXPECT_EQ(m.regs[2], rdx);
    EXPECT_EQ(m.regs[3], static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(rdx))));
    EXPECT_EQ(m.regs[4], m.regs[3] & 0xff);
    EXPECT_EQ(m.regs[5], 0u);
    EXPECT_EQ(m.mem[0x5000 - 8], 42u);
}

TEST(Lift, JccTruthTableRegisterForms) {
    std::mt19937_64 rng(31);
    const auto vals = samples(rng);
    for (const auto& j : kJccs) {
        for (unsigned w : {32u, 64u}) {
            const std::string cmp = w == 64 ? "cmp    %rsi,%rdi" : "cmp    %esi,%edi";
            const auto f = lift_one(branch_listing("", cmp, j));
            for (auto a : vals)
                for (auto b : {vals[0], vals[2], vals[4], vals[7], vals[10], a, a + 1, rng()}) {
                    Machine m;
                    m.regs[0] = a, m.regs[1] = b;
                    const bool want = jcc_taken(j, cmp_flags(a, b, w));
                    ASSERT_EQ(m.run(f), want ? 1u : 0u) << j << " w=" << w << " a=" << a << " b=" << b;
                }
        }
    }
}

TEST(Lift, JccTruthTableImmediateAndMemoryForms) {
    std::mt19937_64 rng(37);
    const auto vals = samples(rng);
    const std::vector<std::int64_t> imms = {0, 1, 2, 3, -1, -2, 0x7f, -0x80, 0x7fffffff, -0x7fffffff - 1};
    for (const auto& j : kJccs) {
        for (auto imm : imms) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "$0x%llx", static_cast<unsigned long long>(imm));
            const auto freg = lift_one(branch_listing("", std::string("cmp    ") + buf + ",%rdi", j));
            std::snprintf(buf, sizeof buf, "$0x%llx", static_cast<unsigned long long>(imm) & 0xffffffffull);
            const auto fmem = lift_one(branch_listing("    1000:\tmov    %edi,-0x14(%rbp)\n", std::string("cmpl   ") + buf + ",-0x14(%rbp)", j));
            for (auto a : vals) {
                Machine m;
                m.regs[0] = a;
                EXPECT_EQ(m.run(freg), jcc_taken(j, cmp_flags(a, static_cast<std::uint64_t>(imm), 64)) ? 1u : 0u)
                    << j << " $" << imm << " a=" << a;
                Machine mm;
                mm.regs[0] = a;
                mm.regs[Reg::kFp] = 0x8000;
                EXPECT_EQ(mm.run(fmem), jcc_taken(j, cmp_flags(a, static_cast<std::uint64_t>(imm), 32)) ? 1u : 0u)
                    << j << " mem $" << imm << " a=" << a;
            }
        }
    }
}

TEST(Lift, JccTruthTableTestForms) {
    std::mt19937_64 rng(41);
    const auto vals = samples(rng);
    for (const auto& j : {"je", "jne", "jz", "jnz", "js", "jns"}) {
        const std::string jj = j;
        if (jj == "js" || jj == "jns") {
            EXPECT_THROW(lift_one(branch_listing("", "test   %rdi,%rdi", jj)), LiftError);
            continue;
        }
        const auto same = lift_one(branch_listing("", "test   %rdi,%rdi", jj));
        const auto pair = lift_one(branch_listing("", "test   %esi,%edi", jj));
        for (auto a : vals)
            for (auto b : vals) {
                Machine m;
                m.regs[0] = a, m.regs[1] = b;
                EXPECT_EQ(m.run(same), jcc_taken(jj, test_flags(a, a, 64)) ? 1u : 0u);
                Machine m2;
                m2.regs[0] = a, m2.regs[1] = b;
                EXPECT_EQ(m2.run(pair), jcc_taken(jj, test_flags(a, b, 32)) ? 1u : 0u);
            }
    }
}

TEST(Lift, FusedBranchKeepsTheCompareAddress) {
    const auto f = lift_one(branch_listing("    1000:\tmov    %edi,-0x14(%rbp)\n", "cmpl   $0x2,-0x14(%rbp)", "jg"));
    const auto ls = parse_listing(branch_listing("    1000:\tmov    %edi,-0x14(%rbp)\n", "cmpl   $0x2,-0x14(%rbp)", "jg"));
    std::set<std::uint64_t> asm_addrs;
    for (const auto& l : ls[0].lines) asm_addrs.insert(l.addr);
    for (const auto& i : f.instrs) EXPECT_TRUE(asm_addrs.count(i.addr)) << hex(i.addr);
    const auto br = std::find_if(f.instrs.begin(), f.instrs.end(), [](const MirInstr& i) { return i.op == Opcode::Br; });
    ASSERT_NE(br, f.instrs.end());
    EXPECT_EQ(br->addr, 0x1010u);
}

TEST(Lift, MovToUnrelatedRegisterMayIntervene) {
    const auto f = lift_one(branch_listing("", "cmp    %rsi,%rdi\n    1012:\tmov    $0x5,%ecx", "jl"));
    Machine m;
    m.regs[0] = 1, m.regs[1] = 2;
    EXPECT_EQ(m.run(f), 1u);
    EXPECT_EQ(m.regs[3], 5u);
    EXPECT_THROW(lift_one(branch_listing("", "cmp    %rsi,%rdi\n    1012:\tmov    $0x5,%esi", "jl")), LiftError);
    EXPECT_THROW(lift_one(branch_listing("", "cmp    %rsi,%rdi\n    1012:\tadd    $0x5,%ecx", "jl")), LiftError);
}

TEST(Lift, Errors) {
    try {
        lift_one("0000000000000000 <f>:\n 0: vpaddd %ymm0,%ymm1,%ymm2\n 4: ret\n");
        FAIL();
    } catch (const LiftError& e) {
        EXPECT_NE(std::string(e.what()).find("vpaddd"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("0x0"), std::string::npos);
    }
    EXPECT_THROW(lift_one("0000000000000000 <f>:\n 0: cmp    %rsi,%rdi\n 3: ret\n"), LiftError);
    EXPECT_THROW(lift_one("0000000000000000 <f>:\n 0: jle    6 <f+0x6>\n 2: ret\n 6: ret\n"), LiftError);
    EXPECT_THROW(lift_one("0000000000000000 <f>:\n 0: call   *%rax\n 2: ret\n"), LiftError);
    EXPECT_THROW(lift_one("0000000000000000 <f>:\n 0: mov    0x10(%rip),%eax\n 6: ret\n"), LiftError);
    EXPECT_THROW(lift_one("0000000000000000 <f>:\n 0: jmp    40 <g>\n 2: ret\n"), LiftError);
}

TEST(Lift, TemporariesAvoidLiveRegisters) {
    // r14 and r15 occupy r12 and r13, so the compare temporary comes from r14d/r15d.
    const auto f = lift_one(branch_listing("    1000:\tmov    %r14,%r15\n", "cmpl   $0x2,-0x14(%rbp)", "jle"));
    const auto ld = std::find_if(f.instrs.begin(), f.instrs.end(), [](const MirInstr& i) { return i.op == Opcode::Load; });
    ASSERT_NE(ld, f.instrs.end());
    EXPECT_GE(ld->dst.id, 14);
}

TEST(Lift, Deterministic) {
    const std::string text = branch_listing("    1000:\tmov    %edi,-0x14(%rbp)\n", "cmpl   $0x2,-0x14(%rbp)", "jle");
    EXPECT_EQ(render(lift_one(text)), render(lift_one(text)));
}

TEST(Lift, AddressesNeverDecrease) {
    const auto f = lift_one(branch_listing("    1000:\tmov    %edi,-0x14(%rbp)\n", "cmpl   $0x2,-0x14(%rbp)", "ja"));
    for (std::size_t k = 1; k < f.instrs.size(); ++k) EXPECT_LE(f.instrs[k - 1].addr, f.instrs[k].addr);
    EXPECT_NO_THROW(build_cfg(f));
}

TEST(Lift, DumpTablesOrder) {
    const std::string t = x86::dump_tables();
    EXPECT_EQ(t.find("rdi r0"), t.find("rdi"));
    EXPECT_LT(t.find("rdi r0"), t.find("rsi r1"));
    EXPECT_LT(t.find("r9 r5"), t.find("rax r6"));
    EXPECT_NE(t.find("jle sle"), std::string::npos);
    EXPECT_NE(t.find("ja ult src, dst"), std::string::npos);
    EXPECT_EQ(t, x86::dump_tables());
}
