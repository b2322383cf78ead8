#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latentlab/model.hpp"
#include "latentlab/tasks.hpp"
#include "latentlab/trainer.hpp"

namespace latentlab {

/// Fraction with an explicit undefined state (zero incorrect predictions).
struct Fraction {
    double value = 0.0;
    bool defined = false;

    static Fraction undefined() { return {0.0, false}; }
    static Fraction of(double v) { return {v, true}; }
};

/// Among incorrect predictions, the share that picked `option`. Undefined
/// when every prediction is correct.
Fraction frac_incorrect_choosing(const std::vector<int>& predictions, const std::vector<int>& golds,
                                 int option);

/// Among incorrect predictions, the share equal to the sample's shortcut
/// target. Targets must differ from gold everywhere.
Fraction shortcut_error_fraction(const std::vector<int>& predictions, const std::vector<int>& golds,
                                 const std::vector<int>& shortcut_targets);

struct EpochPoint {
    int epoch = 0;
    int stage = 0;
    double accuracy = 0.0;
    Fraction fraction;  // biased-option or shortcut-error fraction
};

struct ConditionCurve {
    std::string train_variant;  // "original" / "biased" / "with_shortcut" / "without_shortcut"
    std::string test_variant;   // "uniform" / "a_with" / "without" / "wa_with"
    std::vector<EpochPoint> points;
};

struct OptionBiasConfig {
    double fraction = 0.75;
    int target_pos = 2;  // option C
    ReasoningMode mode = ReasoningMode::Coconut;
    uint64_t seed = 1;
};

struct OptionBiasResult {
    ConditionCurve original;  // trained on the untouched set
    ConditionCurve biased;    // trained on the manipulated set
};

/// Train on the original and the biased variant of the same base data; after
/// every epoch evaluate accuracy and the incorrect-choosing-target fraction
/// on the uniform test set.
OptionBiasResult run_option_bias_experiment(const ModelConfig& mcfg,
                                            const std::vector<McqSample>& train_base,
                                            const std::vector<McqSample>& test_uniform,
                                            const OptionBiasConfig& bias, const TrainConfig& tcfg,
                                            const CurriculumConfig& cur);

struct ContextShortcutConfig {
    int passage_len = 12;
    ReasoningMode mode = ReasoningMode::Coconut;
    uint64_t seed = 1;
};

struct ContextShortcutResult {
    // curves indexed [train variant][test variant]
    std::vector<ConditionCurve> curves;
    const ConditionCurve* find(const std::string& train_variant, const std::string& test_variant) const;
};

/// Train with and without shortcut passages on the gold answers; evaluate
/// each epoch on the three aligned test variants (A w/, w/o, WA w/) and the
/// shortcut-error fraction on WA w/.
ContextShortcutResult run_context_shortcut_experiment(const ModelConfig& mcfg,
                                                      const std::vector<MultiHopSample>& train_base,
                                                      const std::vector<MultiHopSample>& test_base,
                                                      const ContextShortcutConfig& ctx,
                                                      const TrainConfig& tcfg,
                                                      const CurriculumConfig& cur);

/// Sample-aligned test variants: (A-with, without, WA-with) plus the WA
/// targets. WA entities are seeded and never collide with question tokens or
/// the gold answer.
struct ContextTestVariants {
    std::vector<MultiHopSample> a_with;
    std::vector<MultiHopSample> without;
    std::vector<MultiHopSample> wa_with;
    std::vector<int> wa_targets;
};
ContextTestVariants build_context_test_variants(const std::vector<MultiHopSample>& base,
                                                int passage_len, uint64_t seed);

void save_curves_csv(const std::string& path, const std::string& experiment, ReasoningMode mode,
                     const std::vector<ConditionCurve>& curves, uint64_t config_hash);

}  // namespace latentlab
