#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latentlab/sample.hpp"

namespace latentlab {

// ---------------------------------------------------------------- logic ----

/// Entailment-chain sample: is the start entity connected to the queried one?
struct LogicSample {
    std::vector<std::vector<int>> facts;      // shuffled fact sentences
    std::vector<int> question;                // [e0, is, target, ?]
    std::vector<std::vector<int>> gold_steps; // chain hops plus conclusion
    bool answer = false;

    TrainingSample to_training_sample() const;
};

std::vector<LogicSample> gen_logic_dataset(uint64_t seed, int n, std::pair<int, int> depth_range,
                                           int distractor_count);

// ------------------------------------------------------------------ mcq ----

/// Fixed synthetic knowledge base: (subject, relation) -> object.
struct McqKb {
    std::vector<int> subjects;   // entity tokens
    std::vector<int> relations;  // relation tokens
    std::vector<std::vector<int>> object;  // object[si][ri] = entity token

    int lookup(int subject_tok, int relation_tok) const;
};

McqKb build_mcq_kb(uint64_t seed, int n_subjects, int n_relations);

struct McqSample {
    std::vector<int> stem;                  // [subject, relation, ?]
    std::array<std::vector<int>, 4> options;  // option texts at positions A..D
    int correct_pos = 0;
    int subject = 0, relation = 0, gold_entity = 0;

    TrainingSample to_training_sample() const;
};

std::vector<McqSample> gen_mcq_dataset(uint64_t seed, int n, const McqKb& kb);

/// Permute option texts so that a seeded round(fraction*n) subset has its
/// correct text at `target_pos`; the rest are spread over the other
/// positions. fraction 0 degenerates to a uniform reshuffle. Shuffle-only:
/// stems, texts and the gold text never change.
std::vector<McqSample> bias_options(const std::vector<McqSample>& data, int target_pos,
                                    double fraction, uint64_t seed);

// ------------------------------------------------------------- multihop ----

struct MultiHopSample {
    std::vector<std::vector<int>> fact_sents;  // shuffled; each [u, desc, rel, w, .]
    std::vector<int> question;                 // [a, rel_p, rel_q, ?]
    int gold_entity = 0;
    int hop_entity = 0;  // the bridge entity b
    int start_entity = 0, rel_p = 0, rel_q = 0;
    std::optional<std::vector<int>> shortcut_passage;
    int shortcut_target = -1;

    TrainingSample to_training_sample() const;
};

std::vector<MultiHopSample> gen_multihop_dataset(uint64_t seed, int n, int distractor_facts);

/// Prepend a descriptor-rich passage about `target_entity` (>= `length`
/// tokens, its descriptors mentioned >= 3 times). The passage shares no
/// bigram with the question and never states the question's relations.
MultiHopSample inject_context(const MultiHopSample& sample, int target_entity, int length);

// ------------------------------------------------------------- polarity ----

struct PolaritySample {
    std::vector<int> prompt;
    int cls = 0;
    std::vector<int> reference_output;  // begins with the class marker

    TrainingSample to_training_sample() const;
};

std::vector<PolaritySample> gen_polarity_dataset(uint64_t seed, int n);

/// Marker-token rule: class of the first marker in the tokens, -1 if none.
int judge_polarity(const std::vector<int>& output);

// ------------------------------------------------------------- helpers -----

/// Tokens between the answer marker and <eos> (empty if no marker).
std::vector<int> extract_answer(const std::vector<int>& generated);

/// First option-letter token of the answer segment, -1 if none.
int extract_mcq_choice(const std::vector<int>& generated);

/// First entity token of the answer segment, -1 if none.
int extract_entity_answer(const std::vector<int>& generated);

/// First true/false token of the answer segment, -1 if none.
int extract_bool_answer(const std::vector<int>& generated);

// ----------------------------------------------------------------- io ------

struct DatasetManifest {
    std::string task;
    uint64_t seed = 0;
    int count = 0;
    std::string params_json;  // generator parameters, serialized
};

void save_logic_jsonl(const std::string& path, const std::vector<LogicSample>& data);
std::vector<LogicSample> load_logic_jsonl(const std::string& path);
void save_mcq_jsonl(const std::string& path, const std::vector<McqSample>& data);
std::vector<McqSample> load_mcq_jsonl(const std::string& path);
void save_multihop_jsonl(const std::string& path, const std::vector<MultiHopSample>& data);
std::vector<MultiHopSample> load_multihop_jsonl(const std::string& path);
void save_polarity_jsonl(const std::string& path, const std::vector<PolaritySample>& data);
std::vector<PolaritySample> load_polarity_jsonl(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& m, uint64_t config_hash);

}  // namespace latentlab
