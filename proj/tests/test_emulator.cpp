#include <gtest/gtest.h>

#include <random>

#include "patchprobe/equiv.hpp"
#include "support/paths.hpp"

using namespace patchprobe;

namespace {

Cfg cfg_of(const std::string& text) { return build_cfg(parse_mir(text).at(0)); }

const char* kDiamond = R"(func d @0
0: br slt, r0, #3, @0x10, @0x4
4: mov r1, #1
8: jmp @0x14
0x10: mov r1, #2
0x14: store [fp + #-8], r1
0x18: ret
endfunc)";

std::vector<const Effect*> of_kind(const Trace& t, EffectKind k) {
    std::vector<const Effect*> out;
    for (const auto& e : t.effects)
        if (e.kind == k) out.push_back(&e);
    return out;
}

std::vector<std::string> rendered(const EmulationResult& r) {
    std::vector<std::string> out;
    for (const auto& t : r.traces) out.push_back(render(t));
    return out;
}

} // namespace

TEST(Emulate, SingleReturn) {
    const auto r = emulate_function(cfg_of("func f @0\n0: ret\nendfunc"));
    ASSERT_EQ(r.traces.size(), 1u);
    ASSERT_EQ(r.traces[0].effects.size(), 1u);
    EXPECT_EQ(r.traces[0].effects[0].kind, EffectKind::Return);
    EXPECT_EQ(render(r.traces[0].effects[0].value), "R(r0)");
    EXPECT_FALSE(r.partial);
}

TEST(Emulate, DiamondJoinBelongsToTheFirstPath) {
    const Cfg g = cfg_of(kDiamond);
    ASSERT_EQ(g.blocks.size(), 4u);
    const auto r = emulate_function(g);
    ASSERT_EQ(r.traces.size(), 2u);
    // Fall arm first: the taken state was pushed first and is popped last.
    EXPECT_EQ(r.traces[0].blocks, (std::vector<std::size_t>{0, 1, 3}));
    EXPECT_EQ(r.traces[1].blocks, (std::vector<std::size_t>{0, 2, 3}));
    EXPECT_EQ(of_kind(r.traces[0], EffectKind::MemStore).size(), 1u);
    EXPECT_EQ(of_kind(r.traces[0], EffectKind::Return).size(), 1u);
    EXPECT_TRUE(of_kind(r.traces[1], EffectKind::MemStore).empty());
    EXPECT_TRUE(of_kind(r.traces[1], EffectKind::Return).empty());
    EXPECT_EQ(render(r.traces[0].effects[0].value), "(not (slt R(r0) 3:64))");
    EXPECT_EQ(render(r.traces[1].effects[0].value), "(slt R(r0) 3:64)");
    EXPECT_EQ(r.emulated_blocks, 4u);
}

TEST(Emulate, GuardConditionsMatchTheSourceTest) {
    const Cfg g = cfg_of(R"(func vmaf_init @0x00
0x00: store [fp + #-20], r1
0x04: load  r3, [fp + #-20]
0x08: br    sle, r3, #2, @0x20, @0x0c
0x0c: ret
0x20: mov   r0, #-22
0x24: ret
endfunc)");
    const auto r = emulate_function(g);
    ASSERT_EQ(r.traces.size(), 2u);
    const Expr w = Expr::symbol("R(r1)", 64);
    const Expr lt3 = Expr::cmp(Rel::Slt, w, Expr::constant(3, 64));
    const auto fall = of_kind(r.traces[0], EffectKind::Condition);
    const auto taken = of_kind(r.traces[1], EffectKind::Condition);
    ASSERT_EQ(fall.size(), 1u);
    ASSERT_EQ(taken.size(), 1u);
    EXPECT_TRUE(equiv(fall[0]->exp(), Expr::bool_not(lt3)));
    EXPECT_TRUE(equiv(taken[0]->exp(), lt3));
    EXPECT_EQ(render(of_kind(r.traces[1], EffectKind::Return)[0]->value), "-22:64");
}

TEST(Step, SpillGoesToTheStackMap) {
    MachineState s;
    step(s, MirInstr::store(0, Reg::fp(), -20, Operand::of(Reg::gpr(1))));
    ASSERT_EQ(s.stack.size(), 1u);
    EXPECT_EQ(render(s.stack.at(-20)), "R(r1)");
    ASSERT_EQ(s.trace.size(), 1u);
    EXPECT_EQ(render(s.trace[0]), "store 0x0 [(add FP -20:64)] R(r1)");
    EXPECT_TRUE(s.mem.empty());
}

TEST(Step, CallBindsAFreshReturnSymbol) {
    MachineState s;
    step(s, MirInstr::call(0x10, "BN_num_bits", 1));
    ASSERT_EQ(s.trace.size(), 1u);
    EXPECT_EQ(render(s.trace[0]), "call 0x10 BN_num_bits(R(r0))");
    EXPECT_EQ(render(read_reg(s, Reg::gpr(0))), "RET(BN_num_bits,0)");
    step(s, MirInstr::call(0x14, "BN_num_bits", 1));
    EXPECT_EQ(render(s.trace[1]), "call 0x14 BN_num_bits(RET(BN_num_bits,0))");
    EXPECT_EQ(render(read_reg(s, Reg::gpr(0))), "RET(BN_num_bits,1)");
}

TEST(Step, CallLeavesOtherStateAlone) {
    MachineState s;
    step(s, MirInstr::mov(0, Reg::gpr(4), Operand::immediate(9)));
    step(s, MirInstr::store(4, Reg::fp(), -8, Operand::immediate(1)));
    step(s, MirInstr::call(8, "free", 1));
    EXPECT_EQ(render(read_reg(s, Reg::gpr(4))), "9:64");
    EXPECT_EQ(render(s.stack.at(-8)), "1:64");
}

TEST(Step, ReturnValueRegisterIsConfigurable) {
    MachineState s;
    step(s, MirInstr::call(0, "f", 0), Reg::gpr(6));
    step(s, MirInstr::ret(4), Reg::gpr(6));
    EXPECT_EQ(render(s.trace.back().value), "RET(f,0)");
    EXPECT_TRUE(s.dead);
    EXPECT_EQ(render(read_reg(s, Reg::gpr(0))), "R(r0)");
}

TEST(Step, LocationSymbolsAreStable) {
    MachineState s;
    step(s, MirInstr::load(0, Reg::gpr(3), Reg::gpr(0), 16));
    step(s, MirInstr::load(4, Reg::gpr(4), Reg::gpr(0), 16));
    step(s, MirInstr::load(8, Reg::gpr(5), Reg::fp(), -32));
    step(s, MirInstr::load(0xc, Reg::gpr(6), Reg::fp(), -32));
    EXPECT_EQ(read_reg(s, Reg::gpr(3)), read_reg(s, Reg::gpr(4)));
    EXPECT_EQ(read_reg(s, Reg::gpr(5)), read_reg(s, Reg::gpr(6)));
    EXPECT_NE(read_reg(s, Reg::gpr(3)), read_reg(s, Reg::gpr(5)));
    EXPECT_EQ(s.mem.size(), 1u);
}

TEST(Step, StructurallyDistinctAddressesAreDistinctCells) {
    MachineState s;
    step(s, MirInstr::alu_op(0, BinOpKind::Add, Reg::gpr(1), Reg::gpr(0), Operand::immediate(8)));
    step(s, MirInstr::store(4, Reg::gpr(1), 0, Operand::immediate(5)));
    step(s, MirInstr::load(8, Reg::gpr(2), Reg::gpr(0), 8));  // same canonical address
    step(s, MirInstr::load(0xc, Reg::gpr(3), Reg::gpr(0), 16));
    EXPECT_EQ(render(read_reg(s, Reg::gpr(2))), "5:64");
    EXPECT_EQ(render(read_reg(s, Reg::gpr(3))), "M((add R(r0) 16:64))");
    ASSERT_EQ(s.mem.size(), 2u);
    EXPECT_NE(s.mem[0].first, s.mem[1].first);
}

TEST(Step, NarrowWritesZeroExtend) {
    MachineState s;
    step(s, MirInstr::mov(0, Reg::gpr(0), Operand::immediate(-1)));
    step(s, MirInstr::mov(4, Reg::gpr(0, true), Operand::immediate(-1)));
    const Expr full = read_reg(s, Reg::gpr(0));
    EXPECT_EQ(full.width(), 64u);
    EXPECT_EQ(evaluate(full, {}), 0xffffffffu);
}

TEST(Step, FramePointerWritesAreNotEffects) {
    MachineState s;
    step(s, MirInstr::alu_op(0, BinOpKind::Sub, Reg::sp(), Reg::sp(), Operand::immediate(16)));
    step(s, MirInstr::mov(4, Reg::fp(), Operand::of(Reg::sp())));
    EXPECT_TRUE(s.trace.empty());
    step(s, MirInstr::store(8, Reg::sp(), 0, Operand::immediate(1)));
    step(s, MirInstr::load(0xc, Reg::gpr(0), Reg::fp(), 0));
    EXPECT_EQ(render(read_reg(s, Reg::gpr(0))), "1:64");
    EXPECT_EQ(s.stack.count(-16), 1u);
}

TEST(Emulate, LoopsAreUnrolledOnce) {
    const auto r = emulate_function(cfg_of(R"(func l @0
0: mov r1, #0
4: add r1, r1, #1
8: br slt, r1, r0, @4, @0xc
0xc: ret
endfunc)"));
    ASSERT_EQ(r.traces.size(), 2u);
    EXPECT_EQ(r.emulated_blocks, 3u);
    // The back edge dies at once; the exit path is explored after it.
    EXPECT_EQ(r.traces[0].blocks, (std::vector<std::size_t>{0, 1, 1}));
    EXPECT_EQ(r.traces[1].blocks, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Emulate, LimitsFlagPartialResults) {
    const Cfg g = cfg_of(kDiamond);
    const auto r = emulate_function(g, {1, 4096});
    EXPECT_TRUE(r.partial);
    EXPECT_EQ(r.emulated_blocks, 1u);
    EXPECT_EQ(r.unvisited_blocks, 3u);
    const auto p = emulate_function(g, {4096, 1});
    EXPECT_TRUE(p.partial);
    EXPECT_EQ(p.traces.size(), 1u);
    EXPECT_THROW(emulate_function(g, {0, 1}), Error);
    EXPECT_THROW(emulate_function(g, {1, 0}), Error);
}

TEST(Emulate, DeadCodeIsNotCountedAsUnvisited) {
    const auto r = emulate_function(cfg_of("func f @0\n0: jmp @8\n4: mov r0, #1\n8: br eq, r0, #0, @0xc, @0x10\n0xc: ret\n0x10: ret\nendfunc"), {2, 10});
    EXPECT_TRUE(r.partial);
    EXPECT_EQ(r.unvisited_blocks, 2u);
}

TEST(EmulateProperties, MatchesTheReferenceEnumerator) {
    std::mt19937_64 rng(101);
    for (int round = 0; round < 300; ++round) {
        const Cfg g = build_cfg(reference::random_function(rng, 1 + rng() % 12));
        const auto r = emulate_function(g);
        const auto ref = reference::reference_paths(g);
        ASSERT_EQ(r.traces.size(), ref.size()) << render(g.function);
        for (std::size_t k = 0; k < ref.size(); ++k) {
            EXPECT_EQ(render(r.traces[k]), reference::replay(g, ref[k])) << render(g.function);
            EXPECT_EQ(std::vector<std::size_t>(r.traces[k].blocks.begin(), r.traces[k].blocks.begin() + static_cast<std::ptrdiff_t>(ref[k].emulated.size())),
                      ref[k].emulated);
        }
    }
}

TEST(EmulateProperties, TerminatesAndCoversEachBlockOnce) {
    std::mt19937_64 rng(103);
    for (int round = 0; round < 300; ++round) {
        const Cfg g = build_cfg(reference::random_function(rng, 1 + rng() % 40));
        const auto r = emulate_function(g);
        EXPECT_LE(r.emulated_blocks, g.blocks.size());
        EXPECT_EQ(r.emulated_blocks, g.blocks.size() - g.unreachable.size());
        std::vector<int> seen(g.blocks.size(), 0);
        for (const auto& t : r.traces) {
            // The last listed block was either emulated by this path or it is the
            // already visited successor where the path died.
            for (std::size_t k = 0; k + 1 < t.blocks.size(); ++k) ++seen[t.blocks[k]];
            if (!t.effects.empty() && t.effects.back().kind == EffectKind::Return) ++seen[t.blocks.back()];
        }
        for (std::size_t b = 0; b < g.blocks.size(); ++b) {
            const bool dead = std::count(g.unreachable.begin(), g.unreachable.end(), b) > 0;
            // Shared prefixes repeat in every path that forks after them.
            if (dead) {
                EXPECT_EQ(seen[b], 0);
            } else {
                EXPECT_GE(seen[b], 1);
            }
        }
    }
}

TEST(EmulateProperties, Deterministic) {
    std::mt19937_64 rng(107);
    for (int round = 0; round < 50; ++round) {
        const Cfg g = build_cfg(reference::random_function(rng, 1 + rng() % 20));
        EXPECT_EQ(render(emulate_function(g)), render(emulate_function(g)));
    }
}

TEST(EmulateProperties, CallTransparency) {
    std::mt19937_64 rng(109);
    int renamed = 0;
    for (int round = 0; round < 100; ++round) {
        MirFunction f = reference::random_function(rng, 1 + rng() % 10);
        auto it = std::find_if(f.instrs.begin(), f.instrs.end(), [](const MirInstr& i) { return i.op == Opcode::Call && i.callee == "g"; });
        if (it == f.instrs.end()) continue;
        ++renamed;
        MirFunction f2 = f;
        f2.instrs[static_cast<std::size_t>(it - f.instrs.begin())].callee = "zz";
        const auto a = rendered(emulate_function(build_cfg(f)));
        auto b = rendered(emulate_function(build_cfg(f2)));
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            // Undo the rename in f2's trace text. "zz" appears nowhere else, but the
            // RET sequence numbers of g and zz count independently.
            std::string t = b[k];
            for (std::size_t p; (p = t.find("zz")) != std::string::npos;) t.replace(p, 2, "g");
            const auto strip = [](std::string s) {
                std::string out;
                for (std::size_t p = 0; p < s.size(); ++p) {
                    if (s.compare(p, 4, "RET(") == 0) {
                        const auto close = s.find(')', p);
                        out += "RET";
                        p = close;
                        continue;
                    }
                    out += s[p];
                }
                return out;
            };
            EXPECT_EQ(strip(a[k]), strip(t));
        }
    }
    EXPECT_GT(renamed, 10);
}
