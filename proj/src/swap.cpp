#include "latentlab/swap.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "latentlab/common.hpp"
#include "latentlab/rng.hpp"
#include "latentlab/tasks.hpp"
#include "latentlab/vocab.hpp"

namespace latentlab {

using nlohmann::json;
namespace vb = vocab;

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const double* data, size_t count) {
    const auto* p = reinterpret_cast<const unsigned char*>(data);
    const size_t len = count * sizeof(double);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        unsigned v = p[i] << 16;
        if (i + 1 < len) v |= p[i + 1] << 8;
        if (i + 2 < len) v |= p[i + 2];
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += i + 1 < len ? kB64[(v >> 6) & 63] : '=';
        out += i + 2 < len ? kB64[v & 63] : '=';
    }
    return out;
}

std::vector<double> b64_decode(const std::string& s) {
    static int rev[256];
    static bool init = false;
    if (!init) {
        for (int i = 0; i < 256; ++i) rev[i] = -1;
        for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64[i])] = i;
        init = true;
    }
    std::vector<unsigned char> bytes;
    bytes.reserve(s.size() / 4 * 3);
    unsigned v = 0;
    int bits = 0;
    for (char c : s) {
        if (c == '=') break;
        const int d = rev[static_cast<unsigned char>(c)];
        require(d >= 0, "trace store: invalid base64 payload");
        v = (v << 6) | static_cast<unsigned>(d);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            bytes.push_back(static_cast<unsigned char>((v >> bits) & 0xff));
        }
    }
    require(bytes.size() % sizeof(double) == 0, "trace store: truncated latent payload");
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace

TraceStore cache_traces(const TinyTransformer& model, const std::vector<TrainingSample>& samples,
                        ReasoningMode mode, int n_latent, int max_new) {
    require(mode == ReasoningMode::ExplicitCoT || mode == ReasoningMode::Coconut,
            "cache_traces: mode must be cot or coconut");
    TraceStore store;
    store.mode = mode;
    store.model_hash = model.weights_hash();
    for (size_t i = 0; i < samples.size(); ++i) {
        TraceStore::Entry e;
        e.id = static_cast<int>(i);
        try {
            if (mode == ReasoningMode::ExplicitCoT) {
                std::vector<PositionInput> prefix;
                for (int t : samples[i].question) prefix.push_back(PositionInput::from_token(t));
                e.generated = model.greedy_decode(prefix, max_new, {vb::EOS});
                for (int t : e.generated) {
                    if (t == vb::ANS || t == vb::EOS) break;
                    e.cot_tokens.push_back(t);
                }
            } else {
                CoconutResult res = coconut_forward(model, samples[i].question, n_latent, max_new);
                e.latent = std::move(res.trace);
                e.latent.sample_id = e.id;
                e.generated = std::move(res.generated);
            }
        } catch (const ContractError&) {
            e.ok = false;  // overflow: excluded, flagged
        }
        store.entries.push_back(std::move(e));
    }
    return store;
}

SwapPlan make_swap_plan(int n, uint64_t seed) {
    require(n >= 2, "make_swap_plan: need at least two samples");
    Rng rng = stream(seed, "swap/plan");
    SwapPlan plan;
    plan.seed = seed;
    plan.perm.resize(static_cast<size_t>(n));
    // resample until fixed-point-free
    while (true) {
        for (int i = 0; i < n; ++i) plan.perm[static_cast<size_t>(i)] = i;
        rng.shuffle(plan.perm);
        bool fixed = false;
        for (int i = 0; i < n; ++i)
            if (plan.perm[static_cast<size_t>(i)] == i) {
                fixed = true;
                break;
            }
        if (!fixed) return plan;
    }
}

SwapPlan identity_plan(int n) {
    require(n >= 1, "identity_plan: empty");
    SwapPlan plan;
    plan.seed = 0;
    plan.perm.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) plan.perm[static_cast<size_t>(i)] = i;
    return plan;
}

uint64_t SwapPlan::hash() const {
    uint64_t h = fnv1a64(&seed, sizeof seed);
    return fnv1a64(perm.data(), perm.size() * sizeof(int), h);
}

std::vector<PositionInput> build_swapped_prefix(const TrainingSample& sample,
                                                const TraceStore::Entry& trace, ReasoningMode mode,
                                                int dim) {
    std::vector<PositionInput> prefix;
    for (int t : sample.question) prefix.push_back(PositionInput::from_token(t));
    if (mode == ReasoningMode::ExplicitCoT) {
        for (int t : trace.cot_tokens) prefix.push_back(PositionInput::from_token(t));
    } else {
        prefix.push_back(PositionInput::from_token(vb::BOT));
        for (const Tensor& z : trace.latent.z) {
            require(z.cols() == dim, "run_swapped: foreign latent width mismatch");
            prefix.push_back(PositionInput::from_vector(z));
        }
        prefix.push_back(PositionInput::from_token(vb::EOT));
    }
    return prefix;
}

std::vector<std::vector<int>> run_swapped(const TinyTransformer& model,
                                          const std::vector<TrainingSample>& samples,
                                          const TraceStore& store, const SwapPlan& plan,
                                          ReasoningMode mode, int max_new) {
    require(store.mode == mode, "run_swapped: store mode mismatch");
    require(plan.perm.size() == samples.size() && store.entries.size() == samples.size(),
            "run_swapped: plan/store size mismatch");
    std::vector<std::vector<int>> out(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const TraceStore::Entry& trace = store.entries[static_cast<size_t>(plan.perm[i])];
        if (!trace.ok) continue;
        const auto prefix = build_swapped_prefix(samples[i], trace, mode, model.config().dim);
        out[i] = model.greedy_decode(prefix, max_new, {vb::EOS});
    }
    return out;
}

SwapReport swap_metrics(const std::vector<int>& original_answers,
                        const std::vector<int>& swapped_answers, const std::vector<int>& gold) {
    require(original_answers.size() == swapped_answers.size() && gold.size() == original_answers.size(),
            "swap_metrics: misaligned answer lists");
    require(!gold.empty(), "swap_metrics: empty lists");
    const double n = static_cast<double>(gold.size());
    int orig_ok = 0, swapped_ok = 0, changed = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        orig_ok += original_answers[i] == gold[i];
        swapped_ok += swapped_answers[i] == gold[i];
        changed += swapped_answers[i] != original_answers[i];
    }
    SwapReport r;
    r.orig_acc = 100.0 * orig_ok / n;
    r.swapped_acc = 100.0 * swapped_ok / n;
    r.ir = 100.0 * changed / n;
    return r;
}

void save_trace_store_jsonl(const std::string& path, const TraceStore& store, uint64_t config_hash) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << json{{"schema", 1},
              {"mode", mode_name(store.mode)},
              {"model_hash", hash_hex(store.model_hash)},
              {"config_hash", hash_hex(config_hash)},
              {"version", kVersion}}
             .dump()
      << '\n';
    for (const auto& e : store.entries) {
        json j{{"id", e.id}, {"ok", e.ok}, {"generated", e.generated}};
        if (store.mode == ReasoningMode::ExplicitCoT) {
            j["cot"] = e.cot_tokens;
        } else {
            json zs = json::array();
            for (const Tensor& z : e.latent.z) zs.push_back(b64_encode(z.v.data(), z.v.size()));
            j["z"] = zs;
        }
        f << j.dump() << '\n';
    }
}

TraceStore load_trace_store_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open for read: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(f, line)), "trace store: missing header");
    json header = json::parse(line);
    TraceStore store;
    store.mode = mode_from_name(header.at("mode").get<std::string>());
    store.model_hash = std::stoull(header.at("model_hash").get<std::string>(), nullptr, 16);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        TraceStore::Entry e;
        e.id = j.at("id").get<int>();
        e.ok = j.at("ok").get<bool>();
        e.generated = j.at("generated").get<std::vector<int>>();
        if (store.mode == ReasoningMode::ExplicitCoT) {
            e.cot_tokens = j.at("cot").get<std::vector<int>>();
        } else {
            for (const auto& zv : j.at("z"))
                e.latent.z.push_back(Tensor::row(b64_decode(zv.get<std::string>())));
            e.latent.sample_id = e.id;
        }
        store.entries.push_back(std::move(e));
    }
    return store;
}

void save_swap_report_json(const std::string& path, const SwapReport& report, uint64_t config_hash,
                           uint64_t seed) {
    json j{{"orig_acc", report.orig_acc},
           {"swapped_acc", report.swapped_acc},
           {"ir", report.ir},
           {"plan_seed", report.plan_seed},
           {"plan_hash", hash_hex(report.plan_hash)},
           {"mode", report.mode},
           {"seed", seed},
           {"config_hash", hash_hex(config_hash)},
           {"version", kVersion}};
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump(2) << '\n';
}

}  // namespace latentlab
