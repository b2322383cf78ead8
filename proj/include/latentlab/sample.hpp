#pragma once

#include <string>
#include <vector>

namespace latentlab {

enum class ReasoningMode { Standard, ExplicitCoT, Coconut };

std::string mode_name(ReasoningMode m);
ReasoningMode mode_from_name(const std::string& s);

/// Supervised sample: question tokens, ordered reasoning steps, answer tokens.
struct TrainingSample {
    std::vector<int> question;
    std::vector<std::vector<int>> steps;
    std::vector<int> answer;

    void validate() const;
};

}  // namespace latentlab
