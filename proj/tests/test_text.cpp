#include <gtest/gtest.h>

#include "lexdial/text.hpp"

using lexdial::normalization_config;
using lexdial::normalize_text;
using tokens = std::vector<std::string>;

TEST(NormalizeText, LowercasesAndSplits) {
    EXPECT_EQ(normalize_text("Gripa fuerte"), (tokens{"gripa", "fuerte"}));
}

TEST(NormalizeText, FoldsAcuteAccents) {
    EXPECT_EQ(normalize_text("resfrío"), (tokens{"resfrio"}));
    EXPECT_EQ(normalize_text("ÁTICO Pingüino mejillas"), (tokens{"atico", "pinguino", "mejillas"}));
}

TEST(NormalizeText, PreservesEnye) {
    EXPECT_EQ(normalize_text("el año pasado"), (tokens{"el", "año", "pasado"}));
    EXPECT_EQ(normalize_text("ARAÑÓN"), (tokens{"arañon"}));
}

TEST(NormalizeText, FoldingCanBeDisabled) {
    normalization_config keep{false};
    EXPECT_EQ(normalize_text("resfrío", keep), (tokens{"resfrío"}));
}

TEST(NormalizeText, ComposesDecomposedInput) {
    // "resfri" + combining acute + "o"
    EXPECT_EQ(normalize_text("resfri\xCC\x81o", normalization_config{false}), (tokens{"resfr\xC3\xADo"}));
    EXPECT_EQ(normalize_text("resfri\xCC\x81o"), (tokens{"resfrio"}));
    // "an" + combining tilde + "o" composes to año.
    EXPECT_EQ(normalize_text("an\xCC\x83o"), (tokens{"año"}));
}

TEST(NormalizeText, PunctuationAndDigits) {
    EXPECT_EQ(normalize_text("¡Hola, mundo! 2x3 #gripa @user"), (tokens{"hola", "mundo", "2x3", "gripa", "user"}));
    EXPECT_TRUE(normalize_text("").empty());
    EXPECT_TRUE(normalize_text("  ...!!  ").empty());
}

TEST(NormalizeText, OtherDiacriticsAreKept) {
    // Only acute and diaeresis fold.
    EXPECT_EQ(normalize_text("à ç"), (tokens{"à", "ç"}));
}
