#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "termret/error.hpp"
#include "termret/prompting.hpp"
#include "termret/util.hpp"

namespace {

using namespace termret;

const SentenceRecord kWind{"d01", "The rotor speed reading is logged every minute.", "wind_energy", {"rotor speed"}};
const SentenceRecord kQuery{
    "q1", "The blood pressure measurement is recorded daily.", "heart_failure", {"blood pressure"}};

std::string terms_line(const std::string& rendered) {
  const auto at = rendered.rfind("\nTerms: ");
  return rendered.substr(at + 8);
}

TEST(Instruction, DefaultMentionsDomain) {
  const std::string s = render_instruction(default_instruction_template(), "heart failure");
  EXPECT_NE(s.find("relevant to the heart failure domain"), std::string::npos);
  EXPECT_EQ(s.find("[DOMAIN_NAME]"), std::string::npos);
  EXPECT_NE(s.find("[DEMONSTRATIONS]"), std::string::npos);
  // Underscored corpus ids render as words.
  EXPECT_EQ(render_instruction(default_instruction_template(), "heart_failure"), s);
}

TEST(Instruction, MissingPlaceholder) {
  try {
    render_instruction("Extract [DOMAIN_NAME] terms.", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingPlaceholder);
  }
  EXPECT_THROW(render_instruction("Extract terms.\n[DEMONSTRATIONS]", "x"), Error);
}

TEST(Instruction, LiteralSubstitution) {
  const std::string domain = "a.*b$1\\ (x)[y]";
  EXPECT_EQ(render_instruction("[DOMAIN_NAME]|[DOMAIN_NAME] [DEMONSTRATIONS]", domain),
            domain + "|" + domain + " [DEMONSTRATIONS]");
}

TEST(Instruction, LoadTemplateFile) {
  const auto path = std::filesystem::temp_directory_path() / "termret_prompt_template.txt";
  write_file(path, "Terms for [DOMAIN_NAME]:\n[DEMONSTRATIONS]\n\n");
  EXPECT_EQ(load_template(path), "Terms for [DOMAIN_NAME]:\n[DEMONSTRATIONS]");
  write_file(path, "no placeholders\n");
  EXPECT_THROW(load_template(path), Error);
}

TEST(Demonstration, Rendering) {
  EXPECT_EQ(render_demonstration(kWind),
            "Given sentence from the wind energy domain: The rotor speed reading is logged every minute.\n"
            "Terms: rotor speed");
  SentenceRecord none = kWind;
  none.terms = {};
  EXPECT_EQ(terms_line(render_demonstration(none)), "No term");
  SentenceRecord two = kWind;
  two.terms = {"a", "b"};
  EXPECT_EQ(terms_line(render_demonstration(two)), "a, b");
  SentenceRecord comma = kWind;
  comma.terms = {"a", "b, c", "d"};
  EXPECT_EQ(terms_line(render_demonstration(comma)), "a, d");
}

TEST(BuildPrompt, FigureOneLayout) {
  const std::string instr = render_instruction(default_instruction_template(), kQuery.domain);
  const SentenceRecord* demos[] = {&kWind};
  const PromptBundle p = build_prompt(instr, demos, kQuery);
  const std::string demo = render_demonstration(kWind);
  const std::string query = "Given sentence from the heart failure domain: The blood pressure measurement is recorded daily.";
  const auto demo_at = p.text.find(demo);
  const auto terms_at = p.text.find("Terms: rotor speed");
  const auto query_at = p.text.find(query);
  ASSERT_NE(demo_at, std::string::npos);
  ASSERT_NE(query_at, std::string::npos);
  EXPECT_LT(terms_at, query_at);
  EXPECT_EQ(p.text.substr(p.text.size() - query.size()), query);
  EXPECT_EQ(p.demo_ids, std::vector<std::string>{"d01"});
  EXPECT_EQ(p.query_id, "q1");
}

TEST(BuildPrompt, ZeroDemonstrations) {
  const std::string instr = render_instruction(default_instruction_template(), kQuery.domain);
  const PromptBundle p = build_prompt(instr, {}, kQuery);
  const std::string head = instr.substr(0, instr.find("[DEMONSTRATIONS]"));
  EXPECT_EQ(p.text, head + "\n\n" + query_line(kQuery));
}

TEST(BuildPrompt, TenDemonstrations) {
  std::vector<SentenceRecord> demos(10, kWind);
  std::vector<const SentenceRecord*> ptrs;
  for (auto& d : demos) ptrs.push_back(&d);
  const PromptBundle p =
      build_prompt(render_instruction(default_instruction_template(), kQuery.domain), ptrs, kQuery);
  std::size_t n = 0;
  for (auto pos = p.text.find("Terms:"); pos != std::string::npos; pos = p.text.find("Terms:", pos + 1)) ++n;
  EXPECT_EQ(n, 10u);
  EXPECT_GT(p.text.find(query_line(kQuery)), p.text.rfind("Terms:"));
}

TEST(DemoOrder, AscendingPutsBestLast) {
  const std::vector<ScoredDemo> best_first = {{"a", 0.9}, {"b", 0.5}, {"c", 0.1}};
  EXPECT_EQ(order_demonstrations(best_first, DemoOrder::kAscending).back().demo_id, "a");
  EXPECT_EQ(order_demonstrations(best_first, DemoOrder::kDescending).front().demo_id, "a");
  EXPECT_EQ(order_demonstrations(best_first, DemoOrder::kGiven), best_first);
  EXPECT_EQ(parse_demo_order("desc"), DemoOrder::kDescending);
  EXPECT_THROW(parse_demo_order("random"), Error);
}

TEST(ParseResponse, Rules) {
  EXPECT_TRUE(parse_response("No term").terms.empty());
  EXPECT_TRUE(parse_response("  no TERM \n").terms.empty());
  EXPECT_TRUE(parse_response("\xE2\x80\x9CNo term\xE2\x80\x9D.").terms.empty());
  EXPECT_EQ(parse_response("blood pressure, rotor speed").terms,
            (std::vector<std::string>{"blood pressure", "rotor speed"}));
  EXPECT_EQ(parse_response(" cough ,cough,  ").terms, std::vector<std::string>{"cough"});
  EXPECT_EQ(parse_response("\n\nEdema, Fatigue\nSome commentary").terms, (std::vector<std::string>{"Edema", "Fatigue"}));
  EXPECT_FALSE(parse_response("No term").empty_output);
}

TEST(ParseResponse, EmptyOutputIsFlagged) {
  const ParsedResponse r = parse_response("   \n ");
  EXPECT_TRUE(r.terms.empty());
  EXPECT_TRUE(r.empty_output);
}

TEST(ParseResponse, RenderParseAdjunction) {
  std::mt19937_64 rng(2024);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ-'0123456789";
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1), words(1, 3), len(1, 8), count(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> terms;
    const std::size_t n = count(rng);
    while (terms.size() < n) {
      std::string t;
      const std::size_t w = words(rng);
      for (std::size_t i = 0; i < w; ++i) {
        if (i) t += ' ';
        const std::size_t l = len(rng);
        for (std::size_t j = 0; j < l; ++j) t += alphabet[ch(rng)];
      }
      std::string lower = t;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lower == "no term" || std::find(terms.begin(), terms.end(), t) != terms.end()) continue;
      terms.push_back(t);
    }
    SentenceRecord demo = kWind;
    demo.terms = terms;
    EXPECT_EQ(parse_response(terms_line(render_demonstration(demo))).terms, terms);
  }
}

}  // namespace
