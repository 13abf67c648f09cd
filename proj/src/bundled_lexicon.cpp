// Copyright 2026 The persona-steer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <array>
#include <string>
#include <vector>

#include "persona/activation_io.hpp"

namespace persona {

namespace {

struct Group {
  int id;
  std::vector<const char*> names;
};

// Reference grouping of the 179-trait lexicon.
const std::array<Group, 20>& groups() {
  static const std::array<Group, 20> kGroups = {{
      {1, {"depressive", "nihilistic", "solipsistic"}},
      {2, {"arrogant", "biased", "blunt", "close-minded", "confrontational", "egotistical",
           "hostile", "impatient", "intolerant", "jerk", "narcissistic", "self-centered",
           "stubborn", "vindictive"}},
      {3, {"anxious", "fragile", "humble", "indecisive", "modest", "passive", "shy",
           "submissive", "timid"}},
      {4, {"aloof", "apathetic", "indifferent", "neglectful", "uninterested", "unsympathetic"}},
      {5, {"adventurous", "adventurous spirit", "energetic", "extroverted", "fun-loving",
           "homebody", "humorous", "outgoing", "sociable"}},
      {6, {"catatonic", "introverted", "loner", "reserved", "schizoid", "solitary"}},
      {7, {"dependent", "emotional", "emotional thinker", "intuitive", "neurotic", "schizotypal",
           "sensitive"}},
      {8, {"cannibalistic", "corrupt", "greedy", "lustful", "masochistic", "molestful",
           "murderous", "pedophilic", "psychopathic", "sadistic", "sociopathic", "torturous",
           "vengeful", "violent"}},
      {9, {"analytical", "data-driven", "logical", "practical", "practical thinker", "rational",
           "realistic", "scientific"}},
      {10, {"easygoing", "flexible", "inquisitive", "laid-back", "open-minded", "tolerant",
            "yielding"}},
      {11, {"amiable", "artistic", "charismatic", "content", "friendly", "generous",
            "idealistic", "optimistic"}},
      {12, {"critical", "dour", "paranoid", "pessimistic", "pessimistic realist", "skeptical",
            "stingy"}},
      {13, {"autistic", "cautious", "detail-oriented", "focused", "methodical",
            "obsessive-compulsive", "organized", "perfectionist", "planner", "rigid thinker"}},
      {14, {"fanatical", "histrionic", "passionate", "turbulent", "zealous"}},
      {15, {"big-picture", "creative", "creative thinker", "dreamer", "innovative",
            "innovative thinker", "practical dreamer", "resourceful", "strategic thinker",
            "visionary", "visionary pragmatist"}},
      {16, {"calm", "diplomatic", "forgiving", "mentor-like", "nurturing", "patient",
            "supportive"}},
      {17, {"altruistic", "compassionate", "empathetic", "sympathetic"}},
      {18, {"disorganized", "distracted", "flighty", "irresponsible", "negligent", "spontaneous",
            "unpredictable", "unreliable", "unsystematic"}},
      {19, {"ambitious", "assertive", "autocratic leader", "bold", "competitive", "confident",
            "deceptive", "determined", "dishonest", "independent", "machiavellian",
            "manipulative", "resilient", "showy", "tenacious"}},
      {20, {"ambivert", "conventional", "cooperative leader", "cooperative",
            "diplomatic negotiator", "ethical", "fair-minded", "grounded", "honest", "loyal",
            "optimistic realist", "persuasive", "reliable", "responsible", "serious", "sincere",
            "traditional", "trustworthy", "utilitarian", "vigilant"}},
  }};
  return kGroups;
}

std::string system_prompt_for(const std::string& name) {
  return "You are " + name + ". Answer every request in character.";
}

constexpr const char* kNeutralReference = "You are an assistant. Answer the request directly.";

}  // namespace

const PersonaLexicon& bundled_lexicon() {
  static const PersonaLexicon kLexicon = [] {
    PersonaLexicon lex;
    for (const auto& g : groups()) {
      for (const char* n : g.names) {
        lex.traits.push_back({n, system_prompt_for(n), kNeutralReference});
      }
    }
    return lex;
  }();
  return kLexicon;
}

const std::vector<int>& bundled_reference_groups() {
  static const std::vector<int> kGroupsOf = [] {
    std::vector<int> out;
    for (const auto& g : groups())
      for (std::size_t i = 0; i < g.names.size(); ++i) out.push_back(g.id);
    return out;
  }();
  return kGroupsOf;
}

}  // namespace persona
