#include "latentlab/steer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "latentlab/common.hpp"
#include "latentlab/rng.hpp"
#include "latentlab/tasks.hpp"
#include "latentlab/vocab.hpp"

namespace latentlab {

using nlohmann::json;
namespace vb = vocab;

std::string target_name(SteerTarget t) {
    switch (t) {
        case SteerTarget::LatentTokens: return "latent_tokens";
        case SteerTarget::CoTTokens: return "cot_tokens";
        case SteerTarget::AllGenerated: return "all_generated";
    }
    return "?";
}

void InterventionSpec::validate(int model_layers) const {
    require(!layers.empty(), "InterventionSpec: layer set must be non-empty");
    for (int l : layers) require(l >= 0 && l < model_layers, "InterventionSpec: layer out of range");
    require(p_t > 0.0 && p_t < 1.0, "InterventionSpec: p_t must be strictly interior");
}

std::pair<Tensor, std::vector<int>> collect_hidden(const TinyTransformer& model,
                                                   const std::vector<LabeledPrompt>& dataset,
                                                   ReasoningMode mode, int layer) {
    require(!dataset.empty(), "collect_hidden: empty dataset");
    require(layer >= 0 && layer < model.config().layers, "collect_hidden: layer out of range");
    const int d = model.config().dim;
    Tensor X = Tensor::zeros({static_cast<int>(dataset.size()), d});
    std::vector<int> y;
    y.reserve(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        std::vector<PositionInput> seq;
        for (int t : dataset[i].prompt) seq.push_back(PositionInput::from_token(t));
        if (mode == ReasoningMode::Coconut) seq.push_back(PositionInput::from_token(vb::BOT));
        const ForwardTrace tr = model.forward(seq);
        const Tensor& h = tr.layer_hidden[static_cast<size_t>(layer)];
        const double* row = h.row_ptr(tr.length - 1);
        std::copy(row, row + d, X.row_ptr(static_cast<int>(i)));
        y.push_back(dataset[i].label);
    }
    return {std::move(X), std::move(y)};
}

ProbeTrainResult train_layer_probes(const TinyTransformer& model,
                                    const std::vector<LabeledPrompt>& dataset, ReasoningMode mode,
                                    const std::vector<int>& layers, uint64_t split_seed, double l2) {
    require(!layers.empty(), "train_layer_probes: no layers requested");
    std::vector<int> by_class[2];
    for (size_t i = 0; i < dataset.size(); ++i) {
        const int c = dataset[i].label;
        require(c == 0 || c == 1, "train_layer_probes: labels must be binary");
        by_class[c].push_back(static_cast<int>(i));
    }
    if (by_class[0].size() < 2 || by_class[1].size() < 2)
        throw DataError("train_layer_probes: need two samples of each class for a 50/50 split");

    Rng rng = stream(split_seed, "steer/probe_split");
    std::vector<int> train_ids, test_ids;
    for (int c = 0; c < 2; ++c) {
        rng.shuffle(by_class[c]);
        const size_t half = by_class[c].size() / 2;
        for (size_t i = 0; i < by_class[c].size(); ++i)
            (i < half ? train_ids : test_ids).push_back(by_class[c][i]);
    }
    std::sort(train_ids.begin(), train_ids.end());
    std::sort(test_ids.begin(), test_ids.end());

    ProbeTrainResult out;
    const int d = model.config().dim;
    for (int layer : layers) {
        auto [X, y] = collect_hidden(model, dataset, mode, layer);
        Tensor Xtr = Tensor::zeros({static_cast<int>(train_ids.size()), d});
        std::vector<int> ytr;
        for (size_t i = 0; i < train_ids.size(); ++i) {
            std::copy(X.row_ptr(train_ids[i]), X.row_ptr(train_ids[i]) + d, Xtr.row_ptr(static_cast<int>(i)));
            ytr.push_back(y[static_cast<size_t>(train_ids[i])]);
        }
        const LogisticFit fit = fit_logistic(Xtr, ytr, l2);
        int hit = 0;
        for (int id : test_ids) {
            const double p = logistic_predict(fit, X.row_ptr(id), d);
            hit += (p >= 0.5 ? 1 : 0) == y[static_cast<size_t>(id)];
        }
        ProbeModel probe;
        probe.layer = layer;
        probe.w = fit.w;
        probe.b = fit.b;
        probe.heldout_accuracy = static_cast<double>(hit) / static_cast<double>(test_ids.size());
        out.accuracy_by_layer.push_back(probe.heldout_accuracy);
        out.probes.push_back(std::move(probe));
    }
    int best = 0;
    for (size_t i = 1; i < out.probes.size(); ++i)
        if (out.probes[i].heldout_accuracy > out.probes[static_cast<size_t>(best)].heldout_accuracy)
            best = static_cast<int>(i);
    out.best_layer = out.probes[static_cast<size_t>(best)].layer;
    return out;
}

Tensor steer_vector(const Tensor& h, const ProbeModel& probe, double p_t) {
    require(h.rows() == 1 && h.cols() == probe.w.cols(), "steer_vector: width mismatch");
    require(p_t > 0.0 && p_t < 1.0, "steer_vector: p_t must be strictly interior");
    double ww = 0.0, s = probe.b;
    for (int j = 0; j < h.cols(); ++j) {
        ww += probe.w.v[static_cast<size_t>(j)] * probe.w.v[static_cast<size_t>(j)];
        s += probe.w.v[static_cast<size_t>(j)] * h.v[static_cast<size_t>(j)];
    }
    if (ww <= 0.0) throw ContractError("steer_vector: degenerate probe (zero weight vector)");
    if (sigmoid(s) <= p_t) return h;
    const double alpha = (logit(p_t) - s) / ww;
    Tensor out = h;
    for (int j = 0; j < h.cols(); ++j) out.v[static_cast<size_t>(j)] += alpha * probe.w.v[static_cast<size_t>(j)];
    return out;
}

namespace {

const ProbeModel* probe_for_layer(const std::vector<ProbeModel>& probes, int layer) {
    for (const auto& p : probes)
        if (p.layer == layer) return &p;
    return nullptr;
}

}  // namespace

SteeredGeneration generate_with_steering(const TinyTransformer& model, const TrainingSample& sample,
                                         ReasoningMode mode, const InterventionSpec& spec,
                                         const std::vector<ProbeModel>& probes, int n_latent,
                                         int max_new) {
    spec.validate(model.config().layers);
    require(!(mode == ReasoningMode::Standard && spec.target == SteerTarget::CoTTokens),
            "generate_with_steering: CoT-token target is inconsistent with standard mode");
    for (int l : spec.layers)
        require(probe_for_layer(probes, l) != nullptr,
                "generate_with_steering: probes must cover the spec's layers");

    std::set<int> targeted;
    const InterventionFn iv{
        [&](int layer, int pos) {
            if (!targeted.count(pos)) return false;
            return std::find(spec.layers.begin(), spec.layers.end(), layer) != spec.layers.end();
        },
        [&](int layer, int, const double* h, int d) {
            Tensor hv = Tensor::zeros({1, d});
            std::copy(h, h + d, hv.v.begin());
            return steer_vector(hv, *probe_for_layer(probes, layer), spec.p_t).v;
        }};

    std::vector<PositionInput> seq;
    for (int t : sample.question) seq.push_back(PositionInput::from_token(t));

    SteeredGeneration out;
    const int last_layer = model.config().layers - 1;
    if (mode == ReasoningMode::Coconut) {
        seq.push_back(PositionInput::from_token(vb::BOT));
        for (int k = 0; k < n_latent; ++k) {
            const ForwardTrace tr = model.forward(seq, &iv);
            const Tensor& h = tr.layer_hidden[static_cast<size_t>(last_layer)];
            Tensor z = Tensor::zeros({1, model.config().dim});
            const double* src = h.row_ptr(tr.length - 1);
            std::copy(src, src + model.config().dim, z.v.begin());
            const int pos = static_cast<int>(seq.size());
            seq.push_back(PositionInput::from_vector(std::move(z)));
            if (spec.target == SteerTarget::LatentTokens || spec.target == SteerTarget::AllGenerated)
                targeted.insert(pos);
        }
        seq.push_back(PositionInput::from_token(vb::EOT));
    }

    bool seen_ans = false;
    for (int k = 0; k < max_new; ++k) {
        if (static_cast<int>(seq.size()) >= model.config().max_ctx) break;
        const ForwardTrace tr = model.forward(seq, &iv);
        const double* row = tr.logits.row_ptr(tr.length - 1);
        int best = 0;
        for (int j = 1; j < model.config().vocab; ++j)
            if (row[j] > row[best]) best = j;
        out.output.push_back(best);
        if (best == vb::EOS) break;
        const int pos = static_cast<int>(seq.size());
        seq.push_back(PositionInput::from_token(best));
        switch (spec.target) {
            case SteerTarget::AllGenerated:
                targeted.insert(pos);
                break;
            case SteerTarget::CoTTokens:
                if (mode == ReasoningMode::ExplicitCoT && !seen_ans && best != vb::ANS)
                    targeted.insert(pos);
                break;
            case SteerTarget::LatentTokens:
                break;
        }
        if (best == vb::ANS) seen_ans = true;
    }
    out.perturbed_positions = static_cast<int>(targeted.size() * spec.layers.size());
    return out;
}

PsrReport evaluate_psr(const std::vector<std::vector<int>>& outputs_before,
                       const std::vector<std::vector<int>>& outputs_after,
                       const std::vector<int>& intended, const OutputJudge& judge) {
    require(outputs_before.size() == outputs_after.size() && outputs_before.size() == intended.size(),
            "evaluate_psr: misaligned output lists");
    require(!outputs_before.empty(), "evaluate_psr: empty output lists");
    PsrReport rep;
    int before_hits = 0, after_hits = 0;
    for (size_t i = 0; i < outputs_before.size(); ++i) {
        PsrReport::PerSample ps;
        ps.id = static_cast<int>(i);
        ps.intended = intended[i];
        ps.before_class = judge(outputs_before[i]);
        ps.after_class = judge(outputs_after[i]);
        if (ps.after_class == -1) ++rep.abstentions;
        ps.success = ps.after_class != -1 && ps.after_class == ps.intended;
        before_hits += ps.before_class != -1 && ps.before_class == ps.intended;
        after_hits += ps.success;
        rep.per_sample.push_back(ps);
    }
    const double n = static_cast<double>(outputs_before.size());
    rep.before_rate = 100.0 * before_hits / n;
    rep.after_rate = 100.0 * after_hits / n;
    return rep;
}

void save_probes_json(const std::string& path, const std::vector<ProbeModel>& probes,
                      uint64_t model_hash, uint64_t config_hash) {
    json arr = json::array();
    for (const auto& p : probes)
        arr.push_back(json{{"layer", p.layer},
                           {"w", p.w.v},
                           {"b", p.b},
                           {"accuracy", p.heldout_accuracy}});
    json j{{"probes", arr},
           {"model_hash", hash_hex(model_hash)},
           {"config_hash", hash_hex(config_hash)},
           {"version", kVersion}};
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump(2) << '\n';
}

std::vector<ProbeModel> load_probes_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open for read: " + path);
    json j;
    f >> j;
    std::vector<ProbeModel> out;
    for (const auto& e : j.at("probes")) {
        ProbeModel p;
        p.layer = e.at("layer").get<int>();
        p.w = Tensor::row(e.at("w").get<std::vector<double>>());
        p.b = e.at("b").get<double>();
        p.heldout_accuracy = e.at("accuracy").get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

void save_psr_json(const std::string& path, const PsrReport& report, uint64_t model_hash,
                   uint64_t config_hash, uint64_t seed) {
    json per = json::array();
    for (const auto& s : report.per_sample)
        per.push_back(json{{"id", s.id},
                           {"before", s.before_class},
                           {"after", s.after_class},
                           {"intended", s.intended},
                           {"success", s.success}});
    json j{{"mode", report.mode},
           {"target_set", report.target_set},
           {"p_t", report.p_t},
           {"layers", report.layers},
           {"before", report.before_rate},
           {"after", report.after_rate},
           {"abstentions", report.abstentions},
           {"per_sample", per},
           {"seed", seed},
           {"model_hash", hash_hex(model_hash)},
           {"config_hash", hash_hex(config_hash)},
           {"version", kVersion}};
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump(2) << '\n';
}

}  // namespace latentlab
