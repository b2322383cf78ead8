#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentlab/model.hpp"
#include "latentlab/sample.hpp"
#include "latentlab/trainer.hpp"

namespace latentlab {

/// Cached reasoning traces, one per sample, homogeneous mode.
struct TraceStore {
    ReasoningMode mode = ReasoningMode::ExplicitCoT;
    uint64_t model_hash = 0;
    struct Entry {
        int id = -1;
        std::vector<int> cot_tokens;  // reasoning-step tokens (answer segment excluded)
        LatentTrace latent;
        std::vector<int> generated;   // full generation, answer extraction upstream
        bool ok = true;
    };
    std::vector<Entry> entries;
};

/// Greedy-generate and store each sample's reasoning trace and answer.
/// Samples whose generation overflows are excluded and flagged.
TraceStore cache_traces(const TinyTransformer& model, const std::vector<TrainingSample>& samples,
                        ReasoningMode mode, int n_latent, int max_new);

struct SwapPlan {
    std::vector<int> perm;  // fixed-point-free bijection
    uint64_t seed = 0;

    uint64_t hash() const;
};

/// Seeded derangement; identical for identical (n, seed).
SwapPlan make_swap_plan(int n, uint64_t seed);

/// Identity plan (test escape hatch; not a valid swap plan).
SwapPlan identity_plan(int n);

/// Inputs for answering sample `i` with the foreign trace: question +
/// teacher-forced CoT tokens, or question + <bot> + injected latent vectors +
/// <eot>. Foreign latents are injected verbatim, never recomputed.
std::vector<PositionInput> build_swapped_prefix(const TrainingSample& sample,
                                                const TraceStore::Entry& trace, ReasoningMode mode,
                                                int dim);

/// Re-decode every sample with its permuted trace; returns the generated
/// continuation per sample.
std::vector<std::vector<int>> run_swapped(const TinyTransformer& model,
                                          const std::vector<TrainingSample>& samples,
                                          const TraceStore& store, const SwapPlan& plan,
                                          ReasoningMode mode, int max_new);

struct SwapReport {
    double orig_acc = 0.0;     // percent
    double swapped_acc = 0.0;  // percent
    double ir = 0.0;           // percent of samples whose answer changed
    uint64_t plan_seed = 0;
    uint64_t plan_hash = 0;
    std::string mode;
};

/// Accuracy and inconsistency from aligned answer lists (-1 = unparseable).
SwapReport swap_metrics(const std::vector<int>& original_answers,
                        const std::vector<int>& swapped_answers, const std::vector<int>& gold);

void save_trace_store_jsonl(const std::string& path, const TraceStore& store, uint64_t config_hash);
TraceStore load_trace_store_jsonl(const std::string& path);
void save_swap_report_json(const std::string& path, const SwapReport& report, uint64_t config_hash,
                           uint64_t seed);

}  // namespace latentlab
