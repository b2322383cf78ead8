#include "latentlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "latentlab/common.hpp"
#include "latentlab/rng.hpp"
#include "latentlab/tasks.hpp"
#include "latentlab/vocab.hpp"

namespace latentlab {

namespace vb = vocab;

void CurriculumConfig::validate() const {
    require(c_thought >= 0 && epochs_per_stage >= 0 && max_latent_stage >= 0,
            "CurriculumConfig: negative field");
    require(n_latent >= 1, "CurriculumConfig: n_latent must be >= 1 for coconut inference");
}

BuiltSequence build_stage_sample(const TrainingSample& s, int stage, int c_thought) {
    require(stage >= 0, "build_stage_sample: negative stage");
    s.validate();
    if (stage == 0) return build_mode_sample(s, ReasoningMode::ExplicitCoT);

    const int S = static_cast<int>(s.steps.size());
    const int removed = std::min(stage, S);
    const int n_slots = removed * c_thought;

    BuiltSequence out;
    out.question_len = static_cast<int>(s.question.size());
    const auto put = [&](int tok, bool sup) {
        out.tokens.push_back(tok);
        out.supervised.push_back(sup ? 1 : 0);
    };
    for (int t : s.question) put(t, false);
    put(vb::BOT, false);
    for (int k = 0; k < n_slots; ++k) {
        out.slots.push_back(static_cast<int>(out.tokens.size()));
        put(vb::LATENT, false);
    }
    put(vb::EOT, true);
    for (int i = removed; i < S; ++i)
        for (int t : s.steps[static_cast<size_t>(i)]) put(t, true);
    put(vb::ANS, true);
    for (int t : s.answer) put(t, true);
    put(vb::EOS, true);
    return out;
}

BuiltSequence build_mode_sample(const TrainingSample& s, ReasoningMode mode) {
    s.validate();
    require(mode != ReasoningMode::Coconut, "build_mode_sample: use build_stage_sample for coconut");
    BuiltSequence out;
    out.question_len = static_cast<int>(s.question.size());
    const auto put = [&](int tok, bool sup) {
        out.tokens.push_back(tok);
        out.supervised.push_back(sup ? 1 : 0);
    };
    for (int t : s.question) put(t, false);
    if (mode == ReasoningMode::ExplicitCoT)
        for (const auto& step : s.steps)
            for (int t : step) put(t, true);
    put(vb::ANS, true);
    for (int t : s.answer) put(t, true);
    put(vb::EOS, true);
    return out;
}

CoconutResult coconut_forward(const TinyTransformer& model, const std::vector<int>& question,
                              int n_latent, int max_new) {
    require(!question.empty(), "coconut_forward: empty question");
    require(n_latent >= 0, "coconut_forward: negative latent count");
    const ModelConfig& cfg = model.config();
    require(cfg.vocab > vb::EOT, "coconut_forward: thought markers missing from vocabulary");
    require(static_cast<int>(question.size()) + 2 + n_latent + max_new <= cfg.max_ctx,
            "coconut_forward: context overflow");

    std::vector<PositionInput> seq;
    seq.reserve(question.size() + static_cast<size_t>(n_latent) + 2);
    for (int t : question) seq.push_back(PositionInput::from_token(t));
    seq.push_back(PositionInput::from_token(vb::BOT));

    CoconutResult res;
    const int last_layer = cfg.layers - 1;
    for (int k = 0; k < n_latent; ++k) {
        const ForwardTrace tr = model.forward(seq);
        const Tensor& h = tr.layer_hidden[static_cast<size_t>(last_layer)];
        Tensor z = Tensor::zeros({1, cfg.dim});
        const double* src = h.row_ptr(tr.length - 1);
        std::copy(src, src + cfg.dim, z.v.begin());
        if (!z.all_finite()) throw NumericError("coconut_forward: non-finite latent state");
        res.trace.z.push_back(z);
        seq.push_back(PositionInput::from_vector(std::move(z)));
    }
    seq.push_back(PositionInput::from_token(vb::EOT));
    res.generated = model.greedy_decode(seq, max_new, {vb::EOS});
    return res;
}

SequenceLoss build_sequence_loss(const TinyTransformer& model, Graph& g, const BuiltSequence& seq) {
    const int T = static_cast<int>(seq.tokens.size());
    std::vector<InputSpec> specs(static_cast<size_t>(T));
    for (int p = 0; p < T; ++p) specs[static_cast<size_t>(p)] = InputSpec::tok(seq.tokens[static_cast<size_t>(p)]);

    const int last_layer = model.config().layers - 1;
    const int m = static_cast<int>(seq.slots.size());
    if (m > 0) {
        const int slot0 = seq.slots[0];
        // pass j fills slot j with the final-layer hidden at the previous
        // position, exactly as in coconut_forward
        for (int j = 1; j <= m; ++j) {
            const int prefix_len = slot0 + j - 1;
            std::vector<InputSpec> prefix(specs.begin(), specs.begin() + prefix_len);
            const FwdNodes pass = model.build_forward(g, prefix);
            specs[static_cast<size_t>(slot0 + j - 1)] =
                InputSpec::node_row(pass.hidden[static_cast<size_t>(last_layer)], prefix_len - 1);
        }
    }
    const FwdNodes full = model.build_forward(g, specs);
    std::vector<int> targets(static_cast<size_t>(T), -1);
    for (int p = 0; p + 1 < T; ++p) {
        if (seq.supervised[static_cast<size_t>(p + 1)])
            targets[static_cast<size_t>(p)] = seq.tokens[static_cast<size_t>(p + 1)];
    }
    return {g.cross_entropy_mean(full.logits, targets), full.logits};
}

AnswerJudge exact_answer_judge() {
    return [](const TrainingSample& s, const std::vector<int>& generated) {
        return extract_answer(generated) == s.answer;
    };
}

double eval_accuracy(const TinyTransformer& model, const std::vector<TrainingSample>& samples,
                     ReasoningMode mode, int n_latent, const AnswerJudge& judge, int max_new) {
    require(!samples.empty(), "eval_accuracy: empty sample set");
    int correct = 0;
    for (const auto& s : samples) {
        std::vector<int> gen;
        if (mode == ReasoningMode::Coconut) {
            gen = coconut_forward(model, s.question, n_latent, max_new).generated;
        } else {
            std::vector<PositionInput> prefix;
            prefix.reserve(s.question.size());
            for (int t : s.question) prefix.push_back(PositionInput::from_token(t));
            gen = model.greedy_decode(prefix, max_new, {vb::EOS});
        }
        if (judge(s, gen)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace detail {

// Shared train loop. `builder` maps (sample, stage) to a sequence; `evaler`
// returns validation accuracy for the stage.
TrainResult train_loop(TinyTransformer& model, const std::vector<TrainingSample>& train,
                       const std::vector<TrainingSample>& val,
                       const std::vector<std::pair<int, int>>& schedule,  // (stage, epochs)
                       const std::function<BuiltSequence(const TrainingSample&, int)>& builder,
                       const std::function<double(int stage)>& evaler, const TrainConfig& cfg,
                       uint64_t seed) {
    require(!train.empty(), "train_loop: empty training set");
    ModelParamAccess access(model);
    std::vector<Tensor*> params;
    std::vector<const Tensor*> cparams;
    for (int i = 0; i < access.count(); ++i) {
        params.push_back(&access.value(i));
        cparams.push_back(&access.value(i));
    }
    OptimizerState opt = OptimizerState::init(cfg.opt, cparams);

    std::vector<Tensor> grad(params.size());
    for (size_t k = 0; k < params.size(); ++k) grad[k] = Tensor::zeros(params[k]->shape);

    Rng order_rng = stream(seed, "train/order");
    TrainResult result;
    int epoch_idx = 0;

    for (const auto& [stage, epochs] : schedule) {
        std::vector<BuiltSequence> built;
        built.reserve(train.size());
        for (const auto& s : train) built.push_back(builder(s, stage));

        for (int e = 0; e < epochs; ++e) {
            ++epoch_idx;
            std::vector<int> order(train.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            order_rng.shuffle(order);

            double epoch_loss = 0.0;
            long hits = 0, total = 0;
            size_t cursor = 0;
            while (cursor < order.size()) {
                const size_t bend = std::min(cursor + static_cast<size_t>(cfg.batch), order.size());
                const int bn = static_cast<int>(bend - cursor);
                for (auto& t : grad) t.fill(0.0);
                double batch_loss = 0.0;
                for (size_t bi = cursor; bi < bend; ++bi) {
                    const BuiltSequence& seq = built[static_cast<size_t>(order[bi])];
                    Graph g(true);
                    const SequenceLoss nodes = build_sequence_loss(model, g, seq);
                    const double sample_loss = g.val(nodes.loss).v[0];
                    if (!std::isfinite(sample_loss))
                        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch_idx));
                    batch_loss += sample_loss;
                    {
                        const Tensor& logits = g.val(nodes.logits);
                        const int T = static_cast<int>(seq.tokens.size());
                        for (int p = 0; p + 1 < T; ++p) {
                            if (!seq.supervised[static_cast<size_t>(p + 1)]) continue;
                            const double* row = logits.row_ptr(p);
                            int best = 0;
                            for (int j = 1; j < logits.cols(); ++j)
                                if (row[j] > row[best]) best = j;
                            hits += best == seq.tokens[static_cast<size_t>(p + 1)];
                            ++total;
                        }
                    }
                    g.backward(nodes.loss);
                    g.visit_param_grads([&](int key, const Tensor& gr) {
                        Tensor& acc = grad[static_cast<size_t>(key)];
                        for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += gr.v[i];
                    });
                }
                epoch_loss += batch_loss;
                const double inv = 1.0 / bn;
                double sq = 0.0;
                for (auto& t : grad)
                    for (auto& x : t.v) {
                        x *= inv;
                        sq += x * x;
                    }
                if (cfg.clip > 0.0) {
                    const double norm = std::sqrt(sq);
                    if (norm > cfg.clip) {
                        const double s = cfg.clip / norm;
                        for (auto& t : grad)
                            for (auto& x : t.v) x *= s;
                    }
                }
                std::vector<const Tensor*> gptr;
                gptr.reserve(grad.size());
                for (const auto& t : grad) gptr.push_back(&t);
                adamw_step(params, gptr, opt);
                cursor = bend;
            }

            EpochLog log;
            log.stage = stage;
            log.epoch = epoch_idx;
            log.train_loss = epoch_loss / static_cast<double>(train.size());
            log.train_token_acc = total > 0 ? static_cast<double>(hits) / total : 0.0;
            // teacher-forced validation loss at the current stage format
            if (!val.empty()) {
                double vloss = 0.0;
                for (const auto& s : val) {
                    Graph g(false);
                    vloss += g.val(build_sequence_loss(model, g, builder(s, stage)).loss).v[0];
                }
                log.val_loss = vloss / static_cast<double>(val.size());
                log.val_acc = evaler(stage);
            }
            result.log.push_back(log);
            if (cfg.on_epoch) cfg.on_epoch(model, stage, epoch_idx);
        }
    }
    if (!result.log.empty()) result.final_val_acc = result.log.back().val_acc;
    return result;
}

}  // namespace detail

TrainResult curriculum_train(TinyTransformer& model, const std::vector<TrainingSample>& train,
                             const std::vector<TrainingSample>& val, const CurriculumConfig& cur,
                             const TrainConfig& cfg, uint64_t seed, const AnswerJudge& judge) {
    cur.validate();
    for (const auto& s : train) require(!s.steps.empty(), "curriculum_train: samples must carry steps");
    std::vector<std::pair<int, int>> schedule;
    for (int stage = 0; stage <= cur.max_latent_stage; ++stage)
        schedule.emplace_back(stage, cur.epochs_per_stage);

    std::vector<TrainingSample> eval_subset = val;
    if (cfg.eval_n > 0 && static_cast<int>(eval_subset.size()) > cfg.eval_n)
        eval_subset.resize(static_cast<size_t>(cfg.eval_n));

    const auto evaler = [&](int stage) {
        if (eval_subset.empty()) return 0.0;
        if (stage == 0)
            return eval_accuracy(model, eval_subset, ReasoningMode::ExplicitCoT, 0, judge, cfg.max_new);
        const int k = std::min(stage * cur.c_thought, cur.n_latent);
        if (k == 0)
            return eval_accuracy(model, eval_subset, ReasoningMode::ExplicitCoT, 0, judge, cfg.max_new);
        return eval_accuracy(model, eval_subset, ReasoningMode::Coconut, k, judge, cfg.max_new);
    };
    return detail::train_loop(
        model, train, val, schedule,
        [&](const TrainingSample& s, int stage) { return build_stage_sample(s, stage, cur.c_thought); },
        evaler, cfg, seed);
}

static TrainResult plain_finetune(TinyTransformer& model, const std::vector<TrainingSample>& train,
                                  const std::vector<TrainingSample>& val, const TrainConfig& cfg,
                                  uint64_t seed, const AnswerJudge& judge, ReasoningMode mode) {
    std::vector<std::pair<int, int>> schedule{{0, cfg.epochs}};
    std::vector<TrainingSample> eval_subset = val;
    if (cfg.eval_n > 0 && static_cast<int>(eval_subset.size()) > cfg.eval_n)
        eval_subset.resize(static_cast<size_t>(cfg.eval_n));
    const auto evaler = [&](int) {
        if (eval_subset.empty()) return 0.0;
        return eval_accuracy(model, eval_subset, mode, 0, judge, cfg.max_new);
    };
    return detail::train_loop(
        model, train, val, schedule,
        [&, mode](const TrainingSample& s, int) { return build_mode_sample(s, mode); }, evaler, cfg,
        seed);
}

TrainResult cot_finetune(TinyTransformer& model, const std::vector<TrainingSample>& train,
                         const std::vector<TrainingSample>& val, const TrainConfig& cfg,
                         uint64_t seed, const AnswerJudge& judge) {
    return plain_finetune(model, train, val, cfg, seed, judge, ReasoningMode::ExplicitCoT);
}

TrainResult standard_finetune(TinyTransformer& model, const std::vector<TrainingSample>& train,
                              const std::vector<TrainingSample>& val, const TrainConfig& cfg,
                              uint64_t seed, const AnswerJudge& judge) {
    return plain_finetune(model, train, val, cfg, seed, judge, ReasoningMode::Standard);
}

void save_train_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                        uint64_t config_hash) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "# config_hash=" << hash_hex(config_hash) << " version=" << kVersion << "\n";
    f << "stage,epoch,split,loss,accuracy\n";
    for (const auto& e : log) {
        f << e.stage << ',' << e.epoch << ",train," << e.train_loss << ',' << e.train_token_acc << "\n";
        f << e.stage << ',' << e.epoch << ",val," << e.val_loss << ',' << e.val_acc << "\n";
    }
}

}  // namespace latentlab
