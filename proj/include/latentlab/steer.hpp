#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latentlab/model.hpp"
#include "latentlab/sample.hpp"
#include "latentlab/stats.hpp"

namespace latentlab {

/// Per-layer linear probe over hidden states.
struct ProbeModel {
    int layer = 0;
    Tensor w;  // [1 x d]
    double b = 0.0;
    double heldout_accuracy = 0.0;
};

enum class SteerTarget { LatentTokens, CoTTokens, AllGenerated };

std::string target_name(SteerTarget t);

struct InterventionSpec {
    SteerTarget target = SteerTarget::CoTTokens;
    std::vector<int> layers;
    double p_t = 0.05;

    void validate(int model_layers) const;
};

struct LabeledPrompt {
    std::vector<int> prompt;
    int label = 0;
};

/// Hidden states at the final prompt position of the given layer, one row per
/// sample. Coconut-mode prompts include the appended <bot>.
std::pair<Tensor, std::vector<int>> collect_hidden(const TinyTransformer& model,
                                                   const std::vector<LabeledPrompt>& dataset,
                                                   ReasoningMode mode, int layer);

struct ProbeTrainResult {
    std::vector<ProbeModel> probes;          // one per requested layer
    std::vector<double> accuracy_by_layer;
    int best_layer = -1;
};

/// Class-balanced 50/50 split, one logistic probe per layer, held-out
/// accuracy per layer.
ProbeTrainResult train_layer_probes(const TinyTransformer& model,
                                    const std::vector<LabeledPrompt>& dataset, ReasoningMode mode,
                                    const std::vector<int>& layers, uint64_t split_seed, double l2);

/// Minimum-norm perturbation along the probe normal driving the probe's
/// probability down to exactly p_t; identity when already at or below it.
Tensor steer_vector(const Tensor& h, const ProbeModel& probe, double p_t);

struct SteeredGeneration {
    std::vector<int> output;       // generated tokens (coconut: after <eot>)
    int perturbed_positions = 0;   // distinct (layer, position) pairs targeted
};

/// Greedy generation with steer_vector applied at every targeted
/// (layer, position) via the intervention hook. Probes are used as given;
/// flip (w, b) to steer the opposite direction.
SteeredGeneration generate_with_steering(const TinyTransformer& model, const TrainingSample& sample,
                                         ReasoningMode mode, const InterventionSpec& spec,
                                         const std::vector<ProbeModel>& probes, int n_latent,
                                         int max_new);

struct PsrReport {
    std::string mode;
    std::string target_set;
    double p_t = 0.0;
    std::vector<int> layers;
    double before_rate = 0.0;  // percent
    double after_rate = 0.0;   // percent
    struct PerSample {
        int id = 0;
        int before_class = -1;
        int after_class = -1;
        int intended = -1;
        bool success = false;
    };
    std::vector<PerSample> per_sample;
    int abstentions = 0;
};

using OutputJudge = std::function<int(const std::vector<int>&)>;  // class id or -1

/// Success: the judged class of the steered output equals the intended
/// class. Abstentions count as failures and are flagged.
PsrReport evaluate_psr(const std::vector<std::vector<int>>& outputs_before,
                       const std::vector<std::vector<int>>& outputs_after,
                       const std::vector<int>& intended, const OutputJudge& judge);

void save_probes_json(const std::string& path, const std::vector<ProbeModel>& probes,
                      uint64_t model_hash, uint64_t config_hash);
std::vector<ProbeModel> load_probes_json(const std::string& path);
void save_psr_json(const std::string& path, const PsrReport& report, uint64_t model_hash,
                   uint64_t config_hash, uint64_t seed);

}  // namespace latentlab
