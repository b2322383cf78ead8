#include "latentlab/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "latentlab/common.hpp"
#include "latentlab/rng.hpp"

namespace latentlab {

using nlohmann::json;

void ModelConfig::validate() const {
    require(layers >= 1 && heads >= 1 && dim >= 1 && ffn >= 1 && vocab >= 2 && max_ctx >= 1,
            "ModelConfig: extents must be positive");
    require(dim % heads == 0, "ModelConfig: dim must be divisible by heads");
}

PositionInput PositionInput::from_token(int t) {
    require(t >= 0, "PositionInput: negative token id");
    PositionInput p;
    p.token = t;
    return p;
}

PositionInput PositionInput::from_vector(Tensor v) {
    require(v.rows() == 1 && v.cols() >= 1, "PositionInput: vector must be [1 x d]");
    require(v.all_finite(), "PositionInput: continuous vector must be finite");
    PositionInput p;
    p.vec = std::move(v);
    return p;
}

TinyTransformer::TinyTransformer(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    init_params(seed);
    // default self-probe input for checkpoints
    probe_tokens_.clear();
    for (int i = 0; i < std::min(6, cfg_.vocab - 1); ++i) probe_tokens_.push_back(i + 1);
}

void TinyTransformer::init_params(uint64_t seed) {
    Rng rng = stream(seed, "model/init");
    params_.clear();
    layer_base_.clear();
    const int d = cfg_.dim, f = cfg_.ffn;
    const double sd = 0.02;
    const double res_sd = sd / std::sqrt(2.0 * cfg_.layers);

    const auto add = [&](const std::string& name, std::vector<int> shape, double stdev) {
        Tensor t = Tensor::zeros(std::move(shape));
        if (stdev > 0)
            for (auto& e : t.v) e = rng.normal(0.0, stdev);
        params_.push_back({name, std::move(t)});
        return static_cast<int>(params_.size()) - 1;
    };
    const auto add_const = [&](const std::string& name, std::vector<int> shape, double fillv) {
        Tensor t = Tensor::zeros(std::move(shape));
        t.fill(fillv);
        params_.push_back({name, std::move(t)});
        return static_cast<int>(params_.size()) - 1;
    };

    embed_ = add("embed", {cfg_.vocab, d}, sd);
    pos_ = add("pos", {cfg_.max_ctx, d}, sd);
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "blk" + std::to_string(l) + ".";
        layer_base_.push_back(static_cast<int>(params_.size()));
        add_const(p + "ln1.g", {1, d}, 1.0);
        add_const(p + "ln1.b", {1, d}, 0.0);
        add(p + "attn.wqkv", {d, 3 * d}, sd);
        add_const(p + "attn.bqkv", {1, 3 * d}, 0.0);
        add(p + "attn.wo", {d, d}, res_sd);
        add_const(p + "attn.bo", {1, d}, 0.0);
        add_const(p + "ln2.g", {1, d}, 1.0);
        add_const(p + "ln2.b", {1, d}, 0.0);
        add(p + "ff.w1", {d, f}, sd);
        add_const(p + "ff.b1", {1, f}, 0.0);
        add(p + "ff.w2", {f, d}, res_sd);
        add_const(p + "ff.b2", {1, d}, 0.0);
    }
    final_g_ = add_const("final_ln.g", {1, d}, 1.0);
    final_b_ = add_const("final_ln.b", {1, d}, 0.0);
    unembed_ = add("unembed", {d, cfg_.vocab}, sd);
}

const Tensor& TinyTransformer::embedding() const { return params_[static_cast<size_t>(embed_)].value; }
const Tensor& TinyTransformer::position_table() const { return params_[static_cast<size_t>(pos_)].value; }

FwdNodes TinyTransformer::build_forward(Graph& g, const std::vector<InputSpec>& inputs,
                                        const InterventionFn* intervention) const {
    const int T = static_cast<int>(inputs.size());
    require(T >= 1, "forward: empty input");
    require(T <= cfg_.max_ctx, "forward: sequence exceeds max context");
    const int d = cfg_.dim;

    const int embed_node = g.param(&params_[static_cast<size_t>(embed_)].value, embed_);
    const int pos_node = g.param(&params_[static_cast<size_t>(pos_)].value, pos_);

    // gather external vectors (if any) into one input node
    Tensor ext_rows;
    std::vector<int> ext_index(static_cast<size_t>(T), -1);
    int n_ext = 0;
    for (int i = 0; i < T; ++i)
        if (inputs[static_cast<size_t>(i)].ext) ++n_ext;
    int ext_node = -1;
    if (n_ext > 0) {
        ext_rows = Tensor::zeros({n_ext, d});
        int k = 0;
        for (int i = 0; i < T; ++i) {
            const InputSpec& in = inputs[static_cast<size_t>(i)];
            if (!in.ext) continue;
            require(in.ext->cols() == d, "forward: injected vector width mismatch");
            const double* src = in.ext->row_ptr(in.ext_row);
            for (int j = 0; j < d; ++j) {
                require(std::isfinite(src[j]), "forward: injected vector must be finite");
                ext_rows.at(k, j) = src[j];
            }
            ext_index[static_cast<size_t>(i)] = k++;
        }
        ext_node = g.input(std::move(ext_rows));
    }

    std::vector<RowRef> tok_rows(static_cast<size_t>(T));
    std::vector<RowRef> pos_rows(static_cast<size_t>(T));
    for (int i = 0; i < T; ++i) {
        const InputSpec& in = inputs[static_cast<size_t>(i)];
        if (in.token >= 0) {
            require(in.token < cfg_.vocab, "forward: token id out of vocabulary");
            tok_rows[static_cast<size_t>(i)] = {embed_node, in.token};
        } else if (in.ext) {
            tok_rows[static_cast<size_t>(i)] = {ext_node, ext_index[static_cast<size_t>(i)]};
        } else {
            require(in.ref.node >= 0, "forward: empty input position");
            tok_rows[static_cast<size_t>(i)] = in.ref;
        }
        pos_rows[static_cast<size_t>(i)] = {pos_node, i};
    }

    const auto p = [&](int idx) { return g.param(&params_[static_cast<size_t>(idx)].value, idx); };

    int x = g.add(g.assemble_rows(tok_rows), g.assemble_rows(pos_rows));

    FwdNodes out;
    out.length = T;
    for (int l = 0; l < cfg_.layers; ++l) {
        const int b = layer_base_[static_cast<size_t>(l)];
        const int ln1 = g.layer_norm(x, p(b + 0), p(b + 1));
        const int qkv = g.add_row(g.matmul(ln1, p(b + 2)), p(b + 3));
        const int att = g.causal_attention(qkv, cfg_.heads);
        const int ao = g.add_row(g.matmul(att, p(b + 4)), p(b + 5));
        x = g.add(x, ao);
        const int ln2 = g.layer_norm(x, p(b + 6), p(b + 7));
        const int h1 = g.gelu(g.add_row(g.matmul(ln2, p(b + 8)), p(b + 9)));
        const int h2 = g.add_row(g.matmul(h1, p(b + 10)), p(b + 11));
        x = g.add(x, h2);
        if (intervention && intervention->targets) {
            std::vector<std::pair<int, std::vector<double>>> patches;
            const Tensor& xv = g.val(x);
            for (int pos = 0; pos < T; ++pos) {
                if (!intervention->targets(l, pos)) continue;
                std::vector<double> rep = intervention->replace(l, pos, xv.row_ptr(pos), d);
                require(static_cast<int>(rep.size()) == d,
                        "intervention: replacement must preserve width");
                patches.emplace_back(pos, std::move(rep));
            }
            if (!patches.empty()) x = g.row_patch(x, patches);
        }
        out.hidden.push_back(x);
    }
    out.final_norm = g.layer_norm(x, p(final_g_), p(final_b_));
    out.logits = g.matmul(out.final_norm, p(unembed_));
    return out;
}

std::vector<InputSpec> TinyTransformer::to_specs(const std::vector<PositionInput>& inputs) const {
    std::vector<InputSpec> specs;
    specs.reserve(inputs.size());
    for (const auto& in : inputs) {
        if (in.is_token())
            specs.push_back(InputSpec::tok(in.token));
        else
            specs.push_back(InputSpec::ext_vec(&in.vec, 0));
    }
    return specs;
}

ForwardTrace TinyTransformer::forward(const std::vector<PositionInput>& inputs,
                                      const InterventionFn* intervention) const {
    Graph g(false);
    const FwdNodes nodes = build_forward(g, to_specs(inputs), intervention);
    ForwardTrace tr;
    tr.length = nodes.length;
    tr.layer_hidden.reserve(nodes.hidden.size());
    for (int h : nodes.hidden) tr.layer_hidden.push_back(g.val(h));
    tr.logits = g.val(nodes.logits);
    if (!tr.logits.all_finite()) throw NumericError("forward: non-finite logits");
    return tr;
}

std::vector<int> TinyTransformer::greedy_decode(const std::vector<PositionInput>& prefix,
                                                int max_new, const std::set<int>& stop_tokens) const {
    require(!prefix.empty(), "greedy_decode: empty prefix");
    require(static_cast<int>(prefix.size()) + max_new <= cfg_.max_ctx,
            "greedy_decode: prefix plus max_new exceeds context");
    std::vector<PositionInput> seq = prefix;
    std::vector<int> out;
    for (int k = 0; k < max_new; ++k) {
        const ForwardTrace tr = forward(seq);
        const int last = tr.length - 1;
        const double* row = tr.logits.row_ptr(last);
        int best = 0;
        for (int j = 1; j < cfg_.vocab; ++j)
            if (row[j] > row[best]) best = j;  // strict: ties keep the lowest id
        out.push_back(best);
        if (stop_tokens.count(best)) break;
        seq.push_back(PositionInput::from_token(best));
    }
    return out;
}

uint64_t TinyTransformer::weights_hash() const {
    uint64_t h = fnv1a64(&cfg_, sizeof cfg_);
    for (const auto& p : params_) {
        h = fnv1a64(p.name, h);
        h = fnv1a64(p.value.v.data(), p.value.v.size() * sizeof(double), h);
    }
    return h;
}

void TinyTransformer::save_checkpoint(const std::string& path) const {
    json header{{"format", "latentlab-checkpoint"},
                {"format_version", 1},
                {"version", kVersion},
                {"feedback_site", kFeedbackSite},
                {"config",
                 {{"layers", cfg_.layers},
                  {"heads", cfg_.heads},
                  {"dim", cfg_.dim},
                  {"ffn", cfg_.ffn},
                  {"vocab", cfg_.vocab},
                  {"max_ctx", cfg_.max_ctx}}},
                {"probe_tokens", probe_tokens_}};
    json names = json::array();
    json shapes = json::array();
    for (const auto& p : params_) {
        names.push_back(p.name);
        shapes.push_back(p.value.shape);
    }
    header["params"] = names;
    header["shapes"] = shapes;

    // probe logits from the current weights
    std::vector<PositionInput> probe;
    for (int t : probe_tokens_) probe.push_back(PositionInput::from_token(t));
    const Tensor logits = forward(probe).logits;

    const std::string hs = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for write: " + path);
    f.write("LLABCKPT", 8);
    const uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : params_)
        f.write(reinterpret_cast<const char*>(p.value.v.data()),
                static_cast<std::streamsize>(p.value.v.size() * sizeof(double)));
    const uint64_t plen = logits.v.size();
    f.write(reinterpret_cast<const char*>(&plen), sizeof plen);
    f.write(reinterpret_cast<const char*>(logits.v.data()),
            static_cast<std::streamsize>(logits.v.size() * sizeof(double)));
    if (!f) throw DataError("checkpoint write failed: " + path);
}

TinyTransformer TinyTransformer::load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "LLABCKPT", 8) != 0)
        throw DataError("not a latentlab checkpoint: " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    const json header = json::parse(hs);
    require(header.at("format_version").get<int>() == 1, "unsupported checkpoint version");

    ModelConfig cfg;
    const json& jc = header.at("config");
    cfg.layers = jc.at("layers").get<int>();
    cfg.heads = jc.at("heads").get<int>();
    cfg.dim = jc.at("dim").get<int>();
    cfg.ffn = jc.at("ffn").get<int>();
    cfg.vocab = jc.at("vocab").get<int>();
    cfg.max_ctx = jc.at("max_ctx").get<int>();

    TinyTransformer m(cfg, 0);
    const auto names = header.at("params").get<std::vector<std::string>>();
    require(names.size() == m.params_.size(), "checkpoint parameter list mismatch");
    for (size_t i = 0; i < names.size(); ++i) {
        require(names[i] == m.params_[i].name, "checkpoint parameter order mismatch");
        Tensor& t = m.params_[i].value;
        f.read(reinterpret_cast<char*>(t.v.data()),
               static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    }
    m.probe_tokens_ = header.at("probe_tokens").get<std::vector<int>>();
    uint64_t plen = 0;
    f.read(reinterpret_cast<char*>(&plen), sizeof plen);
    m.probe_logits_ = Tensor::zeros({static_cast<int>(m.probe_tokens_.size()), cfg.vocab});
    require(plen == m.probe_logits_.v.size(), "checkpoint probe length mismatch");
    f.read(reinterpret_cast<char*>(m.probe_logits_.v.data()),
           static_cast<std::streamsize>(plen * sizeof(double)));
    if (!f) throw DataError("truncated checkpoint: " + path);
    return m;
}

bool TinyTransformer::verify_checkpoint_probe() const {
    if (probe_logits_.v.empty()) return false;
    std::vector<PositionInput> probe;
    for (int t : probe_tokens_) probe.push_back(PositionInput::from_token(t));
    return forward(probe).logits.bit_equal(probe_logits_);
}

}  // namespace latentlab
