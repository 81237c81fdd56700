#include <gtest/gtest.h>

#include "memflow/prompts.hpp"
#include "memflow/validator.hpp"

using namespace memflow;

namespace {

Validator bundled_validator() {
  auto lib = PromptLibrary::bundled();
  return Validator(lib.validator(), lib.validator_user());
}

const std::string kContext = "[s2#0 | 2023-03-22]\nThe GPS system in my Civic stopped working today.";

}  // namespace

TEST(HardFailure, DetectsEscalationAndNotFound) {
  EXPECT_TRUE(detect_hard_failure("ESCALATE_REQUIRED"));
  EXPECT_TRUE(detect_hard_failure("escalate_required."));
  EXPECT_TRUE(detect_hard_failure("Escalate required"));
  EXPECT_TRUE(detect_hard_failure("Sorry, that was not found in the context."));
  EXPECT_TRUE(detect_hard_failure("I don\xE2\x80\x99t know."));
  EXPECT_FALSE(detect_hard_failure("Paris."));
}

TEST(Passthrough, ShortAnswers) {
  EXPECT_TRUE(is_short_passthrough("5"));
  EXPECT_TRUE(is_short_passthrough("Yes."));
  EXPECT_TRUE(is_short_passthrough("21 days"));
  EXPECT_TRUE(is_short_passthrough("Honda Civic"));
  EXPECT_FALSE(is_short_passthrough("You bought a Honda Civic from the dealership last spring."));
}

TEST(JudgeReply, Parsing) {
  EXPECT_EQ(parse_judge_reply("yes"), true);
  EXPECT_EQ(parse_judge_reply("  No."), false);
  EXPECT_EQ(parse_judge_reply("<think>let me see, no wait</think>\nYes"), true);
  EXPECT_EQ(parse_judge_reply("**YES**"), true);
  EXPECT_FALSE(parse_judge_reply("maybe").has_value());
}

TEST(Overlap, ThresholdAtTau) {
  EXPECT_TRUE(overlap_fallback("The GPS stopped working.", kContext).grounded);
  EXPECT_FALSE(overlap_fallback("Zebras eat carrots daily.", kContext).grounded);
  EXPECT_EQ(overlap_fallback("x", kContext).stage, VerdictStage::OverlapFallback);
}

TEST(Validator, StageOrder) {
  auto v = bundled_validator();
  auto hard = v.validate("ESCALATE_REQUIRED", kContext, "q", nullptr);
  EXPECT_FALSE(hard.grounded);
  EXPECT_EQ(hard.stage, VerdictStage::HardFailure);
  auto pass = v.validate("March 22", kContext, "q", nullptr);
  EXPECT_TRUE(pass.grounded);
  EXPECT_EQ(pass.stage, VerdictStage::Passthrough);
  auto ov = v.validate("The GPS system in your Civic stopped working on that day.", kContext, "q", nullptr);
  EXPECT_EQ(ov.stage, VerdictStage::OverlapFallback);
  EXPECT_TRUE(ov.grounded);
}

TEST(Validator, JudgeDecidesLongAnswers) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{{"", "", {"no"}}});
  LlmGateway gw(backend);
  auto v = bundled_validator();
  auto verdict = v.validate("The GPS system in your Civic stopped working on that day.", kContext, "When?", &gw);
  EXPECT_EQ(verdict.stage, VerdictStage::LlmJudge);
  EXPECT_FALSE(verdict.grounded);
  ASSERT_TRUE(verdict.judge_call.has_value());
  auto req = backend->requests().at(0);
  EXPECT_EQ(req.max_new_tokens, 8u);
  EXPECT_NE(req.user_message.find("When?"), std::string::npos);
}

TEST(Validator, JudgeContextTruncated) {
  auto v = bundled_validator();
  std::string ctx(10000, 'a');
  auto req = v.judge_request("q", ctx, "ans");
  EXPECT_EQ(req.user_message.find(std::string(6001, 'a')), std::string::npos);
  EXPECT_NE(req.user_message.find(std::string(6000, 'a')), std::string::npos);
}

TEST(Validator, UnparseableJudgeFallsBackToOverlap) {
  LlmGateway gw(std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{{"", "", {"hmm"}}}));
  auto verdict = bundled_validator().validate("The GPS system in your Civic stopped working.", kContext, "q", &gw);
  EXPECT_EQ(verdict.stage, VerdictStage::OverlapFallback);
  EXPECT_TRUE(verdict.grounded);
  EXPECT_EQ(verdict.judge_raw, "hmm");
}

TEST(Escalation, MapMatchesTable) {
  EXPECT_EQ(escalation_target(ActionTag::ProfileInjection), ActionTag::TargetedExtraction);
  EXPECT_EQ(escalation_target(ActionTag::TargetedExtraction), ActionTag::ConflictResolution);
  EXPECT_EQ(escalation_target(ActionTag::TemporalReasoning), ActionTag::TargetedExtraction);
  EXPECT_EQ(escalation_target(ActionTag::ConflictResolution), ActionTag::TargetedExtraction);
  EXPECT_EQ(escalation_target(ActionTag::BroadSummarization), ActionTag::TargetedExtraction);
  EXPECT_EQ(escalation_target(ActionTag::ConstraintValidation), ActionTag::TargetedExtraction);
  EXPECT_EQ(escalation_target(ActionTag::StateTracking), ActionTag::ConflictResolution);
  EXPECT_EQ(kEscalationRetryCap, 1);
}
