#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "latentlab/graph.hpp"
#include "latentlab/tensor.hpp"

namespace latentlab {

struct ModelConfig {
    int layers = 4;
    int heads = 4;
    int dim = 128;
    int ffn = 512;
    int vocab = 256;
    int max_ctx = 256;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// One sequence position: a token id or an injected continuous vector.
struct PositionInput {
    int token = -1;
    Tensor vec;  // [1 x d] when continuous

    static PositionInput from_token(int t);
    static PositionInput from_vector(Tensor v);
    bool is_token() const { return token >= 0; }
};

struct ForwardTrace {
    std::vector<Tensor> layer_hidden;  // L tensors of [T x d], post-residual block outputs
    Tensor logits;                     // [T x V]
    int length = 0;
};

/// Replaces targeted block-output vectors before they flow onward. The
/// replacement must preserve the width d.
struct InterventionFn {
    std::function<bool(int layer, int pos)> targets;
    std::function<std::vector<double>(int layer, int pos, const double* h, int d)> replace;
};

/// Graph-side handle returned by build_forward for training code.
struct FwdNodes {
    std::vector<int> hidden;  // per-layer block output nodes
    int final_norm = -1;
    int logits = -1;
    int length = 0;
};

/// Input position for build_forward: token, graph-node row (feedback), or a
/// row of an external matrix.
struct InputSpec {
    int token = -1;
    RowRef ref{-1, -1};
    const Tensor* ext = nullptr;
    int ext_row = 0;

    static InputSpec tok(int t) { return InputSpec{t, {-1, -1}, nullptr, 0}; }
    static InputSpec node_row(int node, int row) { return InputSpec{-1, {node, row}, nullptr, 0}; }
    static InputSpec ext_vec(const Tensor* m, int row) { return InputSpec{-1, {-1, -1}, m, row}; }
};

struct Param {
    std::string name;
    Tensor value;
};

/// Decoder-only transformer: learned position embeddings, pre-norm blocks,
/// final layer norm, untied unembedding. Continuous inputs receive position
/// encodings exactly like token embeddings. The feedback site for latent
/// reasoning is the final block output (post-residual, before the final
/// norm); checkpoints record it.
class TinyTransformer {
public:
    TinyTransformer() = default;
    TinyTransformer(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    static constexpr const char* kFeedbackSite = "block_output";

    int n_params() const { return static_cast<int>(params_.size()); }
    Param& param(int i) { return params_[static_cast<size_t>(i)]; }
    const Param& param(int i) const { return params_[static_cast<size_t>(i)]; }
    const Tensor& embedding() const;
    const Tensor& position_table() const;

    /// Full forward pass on the eager graph `g` (tracked or not).
    FwdNodes build_forward(Graph& g, const std::vector<InputSpec>& inputs,
                           const InterventionFn* intervention = nullptr) const;

    ForwardTrace forward(const std::vector<PositionInput>& inputs,
                         const InterventionFn* intervention = nullptr) const;

    /// Greedy decoding; ties break toward the lowest token id. Appends until
    /// a stop token is produced (included) or max_new tokens.
    std::vector<int> greedy_decode(const std::vector<PositionInput>& prefix, int max_new,
                                   const std::set<int>& stop_tokens) const;

    uint64_t weights_hash() const;

    void save_checkpoint(const std::string& path) const;
    static TinyTransformer load_checkpoint(const std::string& path);
    /// Recompute the stored probe logits and compare bit-exactly.
    bool verify_checkpoint_probe() const;

private:
    void init_params(uint64_t seed);
    std::vector<InputSpec> to_specs(const std::vector<PositionInput>& inputs) const;

    ModelConfig cfg_;
    std::vector<Param> params_;
    // layout indices
    int embed_ = 0, pos_ = 1, final_g_ = 0, final_b_ = 0, unembed_ = 0;
    std::vector<int> layer_base_;
    // checkpoint self-probe
    std::vector<int> probe_tokens_;
    Tensor probe_logits_;

    friend class ModelParamAccess;
};

/// Mutable access to every parameter tensor, in a stable order (training).
class ModelParamAccess {
public:
    explicit ModelParamAccess(TinyTransformer& m) : m_(m) {}
    int count() const { return m_.n_params(); }
    Tensor& value(int i) { return m_.params_[static_cast<size_t>(i)].value; }
    const std::string& name(int i) const { return m_.params_[static_cast<size_t>(i)].name; }

private:
    TinyTransformer& m_;
};

}  // namespace latentlab
