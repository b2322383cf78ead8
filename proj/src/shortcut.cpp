#include "latentlab/shortcut.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "latentlab/common.hpp"
#include "latentlab/rng.hpp"
#include "latentlab/vocab.hpp"

namespace latentlab {

namespace vb = vocab;

Fraction frac_incorrect_choosing(const std::vector<int>& predictions, const std::vector<int>& golds,
                                 int option) {
    require(predictions.size() == golds.size(), "frac_incorrect_choosing: misaligned lists");
    int incorrect = 0, chose = 0;
    for (size_t i = 0; i < golds.size(); ++i) {
        if (predictions[i] == golds[i]) continue;
        ++incorrect;
        chose += predictions[i] == option;
    }
    if (incorrect == 0) return Fraction::undefined();
    return Fraction::of(static_cast<double>(chose) / static_cast<double>(incorrect));
}

Fraction shortcut_error_fraction(const std::vector<int>& predictions, const std::vector<int>& golds,
                                 const std::vector<int>& shortcut_targets) {
    require(predictions.size() == golds.size() && golds.size() == shortcut_targets.size(),
            "shortcut_error_fraction: misaligned lists");
    for (size_t i = 0; i < golds.size(); ++i)
        require(shortcut_targets[i] != golds[i], "shortcut_error_fraction: target equals gold");
    int incorrect = 0, hit = 0;
    for (size_t i = 0; i < golds.size(); ++i) {
        if (predictions[i] == golds[i]) continue;
        ++incorrect;
        hit += predictions[i] == shortcut_targets[i];
    }
    if (incorrect == 0) return Fraction::undefined();
    return Fraction::of(static_cast<double>(hit) / static_cast<double>(incorrect));
}

namespace {

// Stage-matched generation during curriculum training: epoch 1 (stage 0) is
// explicit CoT, later stages use min(stage * c_thought, n_latent) slots.
std::vector<int> predict_one(const TinyTransformer& model, const TrainingSample& s,
                             ReasoningMode mode, int stage, const CurriculumConfig& cur,
                             int max_new) {
    if (mode == ReasoningMode::Coconut) {
        const int k = std::min(stage * cur.c_thought, cur.n_latent);
        if (k >= 1) return coconut_forward(model, s.question, k, max_new).generated;
        // stage 0: pure CoT regime
        std::vector<PositionInput> prefix;
        for (int t : s.question) prefix.push_back(PositionInput::from_token(t));
        return model.greedy_decode(prefix, max_new, {vb::EOS});
    }
    std::vector<PositionInput> prefix;
    for (int t : s.question) prefix.push_back(PositionInput::from_token(t));
    return model.greedy_decode(prefix, max_new, {vb::EOS});
}

TrainResult train_in_mode(TinyTransformer& model, const std::vector<TrainingSample>& train,
                          ReasoningMode mode, const TrainConfig& cfg, const CurriculumConfig& cur,
                          uint64_t seed) {
    static const std::vector<TrainingSample> kNoVal;
    switch (mode) {
        case ReasoningMode::Coconut:
            return curriculum_train(model, train, kNoVal, cur, cfg, seed, exact_answer_judge());
        case ReasoningMode::ExplicitCoT:
            return cot_finetune(model, train, kNoVal, cfg, seed, exact_answer_judge());
        case ReasoningMode::Standard:
            return standard_finetune(model, train, kNoVal, cfg, seed, exact_answer_judge());
    }
    throw ContractError("train_in_mode: bad mode");
}

}  // namespace

OptionBiasResult run_option_bias_experiment(const ModelConfig& mcfg,
                                            const std::vector<McqSample>& train_base,
                                            const std::vector<McqSample>& test_uniform,
                                            const OptionBiasConfig& bias, const TrainConfig& tcfg,
                                            const CurriculumConfig& cur) {
    require(!train_base.empty() && !test_uniform.empty(), "option bias: empty data");

    std::vector<McqSample> test = test_uniform;
    if (tcfg.eval_n > 0 && static_cast<int>(test.size()) > tcfg.eval_n)
        test.resize(static_cast<size_t>(tcfg.eval_n));
    std::vector<TrainingSample> test_ts;
    std::vector<int> golds;
    for (const auto& s : test) {
        test_ts.push_back(s.to_training_sample());
        golds.push_back(vb::opt(s.correct_pos));
    }
    const int option_tok = vb::opt(bias.target_pos);

    OptionBiasResult result;
    const auto run_variant = [&](const std::vector<McqSample>& data, const std::string& name,
                                 ConditionCurve& curve) {
        curve.train_variant = name;
        curve.test_variant = "uniform";
        std::vector<TrainingSample> train_ts;
        for (const auto& s : data) train_ts.push_back(s.to_training_sample());
        TinyTransformer model(mcfg, split_seed(bias.seed, "shortcut/bias/" + name));
        TrainConfig cfg = tcfg;
        cfg.on_epoch = [&](const TinyTransformer& m, int stage, int epoch) {
            std::vector<int> preds;
            preds.reserve(test_ts.size());
            for (const auto& s : test_ts)
                preds.push_back(extract_mcq_choice(predict_one(m, s, bias.mode, stage, cur, cfg.max_new)));
            int hit = 0;
            for (size_t i = 0; i < preds.size(); ++i) hit += preds[i] == golds[i];
            EpochPoint pt;
            pt.epoch = epoch;
            pt.stage = stage;
            pt.accuracy = static_cast<double>(hit) / static_cast<double>(preds.size());
            pt.fraction = frac_incorrect_choosing(preds, golds, option_tok);
            curve.points.push_back(pt);
        };
        train_in_mode(model, train_ts, bias.mode, cfg, cur, bias.seed);
    };

    run_variant(train_base, "original", result.original);
    run_variant(bias_options(train_base, bias.target_pos, bias.fraction, bias.seed), "biased",
                result.biased);
    return result;
}

ContextTestVariants build_context_test_variants(const std::vector<MultiHopSample>& base,
                                                int passage_len, uint64_t seed) {
    ContextTestVariants out;
    Rng rng = stream(seed, "shortcut/wa_targets");
    for (const auto& s : base) {
        out.a_with.push_back(inject_context(s, s.gold_entity, passage_len));
        out.without.push_back(s);
        int wa;
        do {
            wa = vb::ent(static_cast<int>(rng.below(vb::N_ENT)));
        } while (wa == s.gold_entity || wa == s.start_entity || wa == s.hop_entity);
        out.wa_with.push_back(inject_context(s, wa, passage_len));
        out.wa_targets.push_back(wa);
    }
    return out;
}

const ConditionCurve* ContextShortcutResult::find(const std::string& train_variant,
                                                  const std::string& test_variant) const {
    for (const auto& c : curves)
        if (c.train_variant == train_variant && c.test_variant == test_variant) return &c;
    return nullptr;
}

ContextShortcutResult run_context_shortcut_experiment(const ModelConfig& mcfg,
                                                      const std::vector<MultiHopSample>& train_base,
                                                      const std::vector<MultiHopSample>& test_base,
                                                      const ContextShortcutConfig& ctx,
                                                      const TrainConfig& tcfg,
                                                      const CurriculumConfig& cur) {
    require(!train_base.empty() && !test_base.empty(), "context shortcut: empty data");

    std::vector<MultiHopSample> test = test_base;
    if (tcfg.eval_n > 0 && static_cast<int>(test.size()) > tcfg.eval_n)
        test.resize(static_cast<size_t>(tcfg.eval_n));
    ContextTestVariants variants = build_context_test_variants(test, ctx.passage_len, ctx.seed);

    struct TestSet {
        std::string name;
        std::vector<TrainingSample> samples;
        std::vector<int> golds;
        bool track_fraction = false;
    };
    std::vector<TestSet> sets(3);
    sets[0].name = "a_with";
    sets[1].name = "without";
    sets[2].name = "wa_with";
    sets[2].track_fraction = true;
    for (size_t i = 0; i < variants.without.size(); ++i) {
        sets[0].samples.push_back(variants.a_with[i].to_training_sample());
        sets[1].samples.push_back(variants.without[i].to_training_sample());
        sets[2].samples.push_back(variants.wa_with[i].to_training_sample());
        const int gold = variants.without[i].gold_entity;
        sets[0].golds.push_back(gold);
        sets[1].golds.push_back(gold);
        sets[2].golds.push_back(gold);
    }

    ContextShortcutResult result;
    const auto run_variant = [&](bool with_shortcut) {
        const std::string name = with_shortcut ? "with_shortcut" : "without_shortcut";
        std::vector<TrainingSample> train_ts;
        for (const auto& s : train_base) {
            if (with_shortcut)
                train_ts.push_back(inject_context(s, s.gold_entity, ctx.passage_len).to_training_sample());
            else
                train_ts.push_back(s.to_training_sample());
        }
        const size_t first_curve = result.curves.size();
        for (const auto& ts : sets) {
            ConditionCurve c;
            c.train_variant = name;
            c.test_variant = ts.name;
            result.curves.push_back(c);
        }
        TinyTransformer model(mcfg, split_seed(ctx.seed, "shortcut/context/" + name));
        TrainConfig cfg = tcfg;
        cfg.on_epoch = [&, first_curve](const TinyTransformer& m, int stage, int epoch) {
            for (size_t t = 0; t < sets.size(); ++t) {
                std::vector<int> preds;
                preds.reserve(sets[t].samples.size());
                for (const auto& s : sets[t].samples)
                    preds.push_back(extract_entity_answer(predict_one(m, s, ctx.mode, stage, cur, cfg.max_new)));
                int hit = 0;
                for (size_t i = 0; i < preds.size(); ++i) hit += preds[i] == sets[t].golds[i];
                EpochPoint pt;
                pt.epoch = epoch;
                pt.stage = stage;
                pt.accuracy = static_cast<double>(hit) / static_cast<double>(preds.size());
                if (sets[t].track_fraction)
                    pt.fraction = shortcut_error_fraction(preds, sets[t].golds, variants.wa_targets);
                result.curves[first_curve + t].points.push_back(pt);
            }
        };
        train_in_mode(model, train_ts, ctx.mode, cfg, cur, ctx.seed);
    };

    run_variant(true);
    run_variant(false);
    return result;
}

void save_curves_csv(const std::string& path, const std::string& experiment, ReasoningMode mode,
                     const std::vector<ConditionCurve>& curves, uint64_t config_hash) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "# config_hash=" << hash_hex(config_hash) << " version=" << kVersion << "\n";
    f << "experiment,mode,train_variant,test_variant,epoch,accuracy,fraction,fraction_defined\n";
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            f << experiment << ',' << mode_name(mode) << ',' << c.train_variant << ','
              << c.test_variant << ',' << p.epoch << ',' << p.accuracy << ','
              << (p.fraction.defined ? p.fraction.value : 0.0) << ','
              << (p.fraction.defined ? 1 : 0) << "\n";
        }
    }
}

}  // namespace latentlab
