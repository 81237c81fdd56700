#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace memflow {

/// The seven typed memory operations a query can be routed to.
enum class ActionTag {
  ProfileInjection,
  TargetedExtraction,
  TemporalReasoning,
  ConflictResolution,
  BroadSummarization,
  ConstraintValidation,
  StateTracking,
};

inline constexpr std::array<ActionTag, 7> kAllTags = {
    ActionTag::ProfileInjection,    ActionTag::TargetedExtraction,   ActionTag::TemporalReasoning,
    ActionTag::ConflictResolution,  ActionTag::BroadSummarization,   ActionTag::ConstraintValidation,
    ActionTag::StateTracking,
};

constexpr std::string_view to_string(ActionTag tag) {
  switch (tag) {
    case ActionTag::ProfileInjection: return "profile-injection";
    case ActionTag::TargetedExtraction: return "targeted-extraction";
    case ActionTag::TemporalReasoning: return "temporal-reasoning";
    case ActionTag::ConflictResolution: return "conflict-resolution";
    case ActionTag::BroadSummarization: return "broad-summarization";
    case ActionTag::ConstraintValidation: return "constraint-validation";
    case ActionTag::StateTracking: return "state-tracking";
  }
  return "targeted-extraction";
}

constexpr std::optional<ActionTag> parse_action_tag(std::string_view s) {
  for (auto tag : kAllTags) {
    if (to_string(tag) == s) return tag;
  }
  return std::nullopt;
}

enum class Tier { ProfileLookup = 1, TargetedRetrieval = 2, DeepReasoning = 3 };

constexpr Tier tier_of(ActionTag tag) {
  switch (tag) {
    case ActionTag::ProfileInjection: return Tier::ProfileLookup;
    case ActionTag::TargetedExtraction: return Tier::TargetedRetrieval;
    default: return Tier::DeepReasoning;
  }
}

}  // namespace memflow
