#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "patchprobe/patchmeta.hpp"

using namespace patchprobe;

namespace {

const char* kLadder = R"(--- a/crypto/ec/ec_mult.c
+++ b/crypto/ec/ec_mult.c
@@ -206,8 +206,8 @@ int ec_scalar_mul_ladder(const EC_GROUP *group, EC_POINT *r,
      */
     cardinality_bits = BN_num_bits(cardinality);
     group_top = bn_get_top(cardinality);
-    if ((bn_wexpand(k, group_top + 1) == NULL)
-        || (bn_wexpand(lambda, group_top + 1) == NULL)) {
+    if ((bn_wexpand(k, group_top + 2) == NULL)
+        || (bn_wexpand(lambda, group_top + 2) == NULL)) {
         ECerr(EC_F_EC_SCALAR_MUL_LADDER, ERR_R_BN_LIB);
         goto err;
     }
@@ -244,7 +244,7 @@ int ec_scalar_mul_ladder(const EC_GROUP *group, EC_POINT *r,
      * k := scalar + 2*cardinality
      */
     kbit = BN_is_bit_set(lambda, cardinality_bits);
-    BN_consttime_swap(kbit, k, lambda, group_top + 1);
+    BN_consttime_swap(kbit, k, lambda, group_top + 2);

     group_top = bn_get_top(group->field);
     if ((bn_wexpand(s->X, group_top) == NULL)
)";

const char* kFlush = R"(--- a/crypto/lhash/lhash.c
+++ b/crypto/lhash/lhash.c
@@ -100,6 +100,8 @@ void OPENSSL_LH_flush(OPENSSL_LHASH *lh)
         }
         lh->b[i] = NULL;
     }
+
+    lh->num_items = 0;
 }

 void OPENSSL_LH_free(OPENSSL_LHASH *lh)
)";

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Diff, GuardAdditionIsOnePureAddHunk) {
    const auto hunks = parse_diff(slurp(std::string(PATCHPROBE_SAMPLES) + "/vmafmotion/fix.diff"));
    ASSERT_EQ(hunks.size(), 1u);
    EXPECT_EQ(hunks[0].kind, HunkKind::PureAddText);
    EXPECT_EQ(hunks[0].file, "libavfilter/vf_vmafmotion.c");
    EXPECT_EQ(hunks[0].added, (std::set<std::size_t>{245, 246, 247}));
    EXPECT_TRUE(hunks[0].deleted.empty());
}

TEST(Diff, ConstantChangeIsAModification) {
    const auto hunks = parse_diff(kLadder);
    ASSERT_EQ(hunks.size(), 2u);
    EXPECT_EQ(hunks[0].kind, HunkKind::Modification);
    EXPECT_EQ(hunks[0].deleted, (std::set<std::size_t>{209, 210}));
    EXPECT_EQ(hunks[0].added, (std::set<std::size_t>{209, 210}));
    EXPECT_EQ(hunks[1].deleted, (std::set<std::size_t>{247}));
    EXPECT_EQ(hunks[1].added, (std::set<std::size_t>{247}));
    EXPECT_EQ(hunks[0].section, " int ec_scalar_mul_ladder(const EC_GROUP *group, EC_POINT *r,");
}

TEST(Diff, EmptyDiff) {
    EXPECT_TRUE(parse_diff("").empty());
    EXPECT_TRUE(parse_diff("diff --git a/x b/x\nindex 1..2 100644\n").empty());
}

TEST(Diff, MalformedHeaders) {
    EXPECT_THROW(parse_diff("@@ -1,2 +1,2\n x\n"), ParseError);
    EXPECT_THROW(parse_diff("@@ -a,2 +1,2 @@\n x\n x\n"), ParseError);
    EXPECT_THROW(parse_diff("@@ -1,2 +1,3 @@\n x\n+y\n"), ParseError);
    EXPECT_THROW(parse_diff("@@ -1,1 +1,1 @@\n x\n"), ParseError);
    try {
        parse_diff("--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n+b\n@@ -9 +9,x @@\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 6u);
    }
}

TEST(Diff, OmittedLengthDefaultsToOne) {
    const auto h = parse_diff("@@ -7 +7,2 @@\n-a\n+b\n+c\n");
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].old_len, 1u);
    EXPECT_EQ(h[0].added, (std::set<std::size_t>{7, 8}));
}

TEST(Diff, NoNewlineMarkerIsNotALine) {
    const auto h = parse_diff("@@ -1,1 +1,1 @@\n-a\n\\ No newline at end of file\n+a\n\\ No newline at end of file\n");
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].deleted, (std::set<std::size_t>{1}));
    EXPECT_EQ(h[0].added, (std::set<std::size_t>{1}));
}

TEST(Diff, KindFollowsLineSets) {
    for (const auto& h : parse_diff(std::string(kLadder) + kFlush)) {
        EXPECT_EQ(h.kind == HunkKind::PureAddText, h.deleted.empty());
        EXPECT_EQ(h.kind == HunkKind::PureDelText, h.added.empty());
    }
    EXPECT_EQ(parse_diff("@@ -3,2 +3,1 @@\n x\n-y\n")[0].kind, HunkKind::PureDelText);
}

TEST(Diff, RandomRoundTrip) {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 200; ++round) {
        std::string text;
        std::size_t old_line = 1 + rng() % 50, new_line = old_line + rng() % 5;
        const int nh = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < nh; ++k) {
            std::vector<std::string> body;
            std::size_t ol = 0, nl = 0;
            bool changed = false;
            const int n = 1 + static_cast<int>(rng() % 10);
            for (int i = 0; i < n || !changed; ++i) {
                switch (rng() % 3) {
                case 0: body.push_back(" ctx"); ++ol, ++nl; break;
                case 1: body.push_back("-old"); ++ol, changed = true; break;
                default: body.push_back("+new"), ++nl, changed = true;
                }
            }
            text += "@@ -" + std::to_string(old_line) + "," + std::to_string(ol) + " +" + std::to_string(new_line) + "," + std::to_string(nl) + " @@\n";
            for (const auto& b : body) text += b + "\n";
            old_line += ol + 3 + rng() % 10;
            new_line += nl + 3 + rng() % 10;
        }
        const auto hunks = parse_diff("--- a/f.c\n+++ b/f.c\n" + text);
        const auto back = parse_diff(render(hunks));
        ASSERT_EQ(back.size(), hunks.size());
        for (std::size_t k = 0; k < hunks.size(); ++k) {
            EXPECT_EQ(back[k].deleted, hunks[k].deleted);
            EXPECT_EQ(back[k].added, hunks[k].added);
            EXPECT_EQ(back[k].kind, hunks[k].kind);
            EXPECT_EQ(back[k].file, "f.c");
        }
    }
}

TEST(LineMaps, Parse) {
    const LineMap lm = parse_linemap("# addr line\n20 103\n0x24 103   # same statement\n\n28 104\n", BinaryRole::Patched);
    EXPECT_EQ(lm.role, BinaryRole::Patched);
    EXPECT_EQ(lm.entries, (std::map<std::uint64_t, std::size_t>{{0x20, 103}, {0x24, 103}, {0x28, 104}}));
    EXPECT_THROW(parse_linemap("20 103\n20 104\n", BinaryRole::Patched), ParseError);
    EXPECT_THROW(parse_linemap("20\n", BinaryRole::Patched), ParseError);
    EXPECT_THROW(parse_linemap("zz 1\n", BinaryRole::Patched), ParseError);
    EXPECT_THROW(parse_linemap("20 1 2\n", BinaryRole::Patched), ParseError);
}

TEST(LineMaps, JoinAddedLine) {
    Hunk h;
    h.file = "f.c";
    h.added = {103};
    const LineMap lm = parse_linemap("20 103\n24 103\n28 104\n", BinaryRole::Patched);
    const AddressSet s = modified_addresses(h, lm, HunkSide::New);
    EXPECT_EQ(s.addrs, (std::set<std::uint64_t>{0x20, 0x24}));
    EXPECT_TRUE(s.diagnostics.empty());
}

TEST(LineMaps, MissingDeletedLineIsReported) {
    Hunk h;
    h.file = "f.c";
    h.deleted = {209};
    const LineMap lm = parse_linemap("20 208\n", BinaryRole::Vulnerable);
    const AddressSet s = modified_addresses(h, lm, HunkSide::Old);
    EXPECT_TRUE(s.addrs.empty());
    ASSERT_EQ(s.diagnostics.size(), 1u);
    EXPECT_NE(s.diagnostics[0].find("209"), std::string::npos);
}

TEST(LineMaps, FlushAssignmentTakesBothAddresses) {
    const auto hunks = parse_diff(kFlush);
    ASSERT_EQ(hunks.size(), 1u);
    EXPECT_EQ(hunks[0].kind, HunkKind::PureAddText);
    const LineMap lm = parse_linemap("4a0 102\n4a8 104\n4ac 104\n4b4 105\n", BinaryRole::Patched);
    const AddressSet s = modified_addresses(hunks[0], lm, HunkSide::New);
    EXPECT_EQ(s.addrs, (std::set<std::uint64_t>{0x4a8, 0x4ac}));
    // The blank added line 103 has no code.
    ASSERT_EQ(s.diagnostics.size(), 1u);
    EXPECT_NE(s.diagnostics[0].find("103"), std::string::npos);
}

TEST(LineMaps, RoleMustMatchSide) {
    Hunk h;
    h.added = {1};
    h.deleted = {1};
    const LineMap vuln = parse_linemap("0 1\n", BinaryRole::Vulnerable);
    const LineMap pat = parse_linemap("0 1\n", BinaryRole::Patched);
    EXPECT_THROW(modified_addresses(h, vuln, HunkSide::New), Error);
    EXPECT_THROW(modified_addresses(h, pat, HunkSide::Old), Error);
    EXPECT_NO_THROW(modified_addresses(h, vuln, HunkSide::Old));
}

TEST(LineMaps, UnmappedAddressesOfAFunction) {
    const auto f = parse_mir("func f @0\n0: mov r0, #1\n4: mov r1, #2\n8: ret\nendfunc")[0];
    const LineMap lm = parse_linemap("0 10\n8 12\n", BinaryRole::Patched);
    EXPECT_EQ(unmapped_addresses(lm, f), std::vector<std::uint64_t>{4});
}

TEST(SideTablesFile, Parse) {
    const SideTables t = parse_side_tables(
        R"({"call_arity": {"av_pix_fmt_desc_get": 1, "ERR_raise_data": 4}, "string_addrs": ["0x2004", 8200],
            "string_args": [["ERR_raise_data", 3]]})");
    EXPECT_EQ(t.call_arity.at("ERR_raise_data"), 4u);
    EXPECT_EQ(t.string_addrs, (std::set<std::uint64_t>{0x2004, 8200}));
    EXPECT_TRUE(t.is_string_arg("ERR_raise_data", 3));
    EXPECT_FALSE(t.is_string_arg("ERR_raise_data", 2));
    EXPECT_EQ(parse_side_tables(to_json(t).dump()).string_addrs, t.string_addrs);
    EXPECT_EQ(parse_side_tables(to_json(t).dump()).call_arity, t.call_arity);
    EXPECT_TRUE(parse_side_tables("{}").call_arity.empty());
}

TEST(SideTablesFile, Rejects) {
    EXPECT_THROW(parse_side_tables(R"({"call_arity": {"f": 7}})"), Error);
    EXPECT_THROW(parse_side_tables(R"({"call_arity": {"f": -1}})"), Error);
    EXPECT_THROW(parse_side_tables(R"({"string_args": [["f"]]})"), Error);
    EXPECT_THROW(parse_side_tables(R"({"string_args": [["f", 6]]})"), Error);
    EXPECT_THROW(parse_side_tables("[1]"), Error);
    EXPECT_THROW(parse_side_tables("{"), ParseError);
}
