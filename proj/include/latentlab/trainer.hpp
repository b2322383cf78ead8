#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latentlab/model.hpp"
#include "latentlab/optim.hpp"
#include "latentlab/sample.hpp"

namespace latentlab {

struct CurriculumConfig {
    int c_thought = 1;
    int epochs_per_stage = 1;
    int max_latent_stage = 5;
    int n_latent = 5;  // latent slots at inference

    void validate() const;
};

/// Token sequence with latent slots and a supervision mask. supervised[p]
/// means predicting tokens[p] from the prefix contributes to the loss.
/// Latent slot positions carry the <latent> placeholder id.
struct BuiltSequence {
    std::vector<int> tokens;
    std::vector<uint8_t> supervised;
    std::vector<int> slots;
    int question_len = 0;
};

/// Stage-s curriculum sequence: the first min(stage, S) steps are replaced by
/// min(stage, S) * c_thought latent slots between <bot> and <eot>. Stage 0 is
/// the plain explicit-CoT sequence (no markers).
BuiltSequence build_stage_sample(const TrainingSample& s, int stage, int c_thought);

/// Standard (question + answer) or explicit-CoT sequence.
BuiltSequence build_mode_sample(const TrainingSample& s, ReasoningMode mode);

struct LatentTrace {
    int sample_id = -1;
    std::vector<Tensor> z;  // each [1 x d]
};

struct CoconutResult {
    LatentTrace trace;
    std::vector<int> generated;  // tokens decoded after <eot>
};

/// Continuous-thought loop: run question+<bot>, feed the final-layer hidden
/// at the last position back as the next input vector, n_latent times, then
/// append <eot> and greedy-decode.
CoconutResult coconut_forward(const TinyTransformer& model, const std::vector<int>& question,
                              int n_latent, int max_new);

struct TrainConfig {
    AdamWConfig opt{1e-3, 0.9, 0.999, 1e-8, 0.01};
    int batch = 16;
    double clip = 1.0;
    int epochs = 6;    // standard / cot fine-tuning
    int eval_n = -1;   // cap validation samples per epoch (-1: all)
    int max_new = 32;  // generation budget during evaluation
    // called after every epoch with the current weights (experiment curves)
    std::function<void(const TinyTransformer&, int stage, int epoch)> on_epoch;
};

struct EpochLog {
    int stage = 0;
    int epoch = 0;  // 1-based, across stages
    double train_loss = 0.0;
    double train_token_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double final_val_acc = 0.0;
};

/// Task-specific correctness rule for generated output.
using AnswerJudge = std::function<bool(const TrainingSample&, const std::vector<int>& generated)>;

/// Generated answer segment must equal the gold answer tokens.
AnswerJudge exact_answer_judge();

/// Generation-based accuracy under a reasoning mode. Coconut uses n_latent
/// feedback slots.
double eval_accuracy(const TinyTransformer& model, const std::vector<TrainingSample>& samples,
                     ReasoningMode mode, int n_latent, const AnswerJudge& judge, int max_new);

/// Staged curriculum training (feedback loop on the fly, gradients flow
/// through all latent passes). Per-epoch validation is stage matched: stage 0
/// evaluates as explicit CoT, stage s as coconut with min(s*c_thought,
/// n_latent) slots.
TrainResult curriculum_train(TinyTransformer& model, const std::vector<TrainingSample>& train,
                             const std::vector<TrainingSample>& val, const CurriculumConfig& cur,
                             const TrainConfig& cfg, uint64_t seed, const AnswerJudge& judge);

TrainResult cot_finetune(TinyTransformer& model, const std::vector<TrainingSample>& train,
                         const std::vector<TrainingSample>& val, const TrainConfig& cfg,
                         uint64_t seed, const AnswerJudge& judge);

TrainResult standard_finetune(TinyTransformer& model, const std::vector<TrainingSample>& train,
                              const std::vector<TrainingSample>& val, const TrainConfig& cfg,
                              uint64_t seed, const AnswerJudge& judge);

struct SequenceLoss {
    int loss = -1;    // scalar node
    int logits = -1;  // [T x V] node
};

/// Loss of one built sequence on a graph (teacher forced, latent slots filled
/// by the feedback loop). Exposed for tests and validation loss.
SequenceLoss build_sequence_loss(const TinyTransformer& model, Graph& g, const BuiltSequence& seq);

void save_train_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                        uint64_t config_hash);

}  // namespace latentlab
