#include "latentlab/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "latentlab/common.hpp"
#include "latentlab/rng.hpp"
#include "latentlab/vocab.hpp"

namespace latentlab {

using nlohmann::json;
namespace vb = vocab;

std::string mode_name(ReasoningMode m) {
    switch (m) {
        case ReasoningMode::Standard: return "standard";
        case ReasoningMode::ExplicitCoT: return "cot";
        case ReasoningMode::Coconut: return "coconut";
    }
    return "?";
}

ReasoningMode mode_from_name(const std::string& s) {
    if (s == "standard") return ReasoningMode::Standard;
    if (s == "cot") return ReasoningMode::ExplicitCoT;
    if (s == "coconut") return ReasoningMode::Coconut;
    throw ContractError("unknown reasoning mode: " + s);
}

void TrainingSample::validate() const {
    require(!question.empty(), "TrainingSample: question must be non-empty");
    require(!answer.empty(), "TrainingSample: answer must be non-empty");
    for (const auto& s : steps) require(!s.empty(), "TrainingSample: steps must be non-empty");
}

// ---------------------------------------------------------------- logic ----

TrainingSample LogicSample::to_training_sample() const {
    TrainingSample t;
    for (const auto& f : facts) t.question.insert(t.question.end(), f.begin(), f.end());
    t.question.insert(t.question.end(), question.begin(), question.end());
    t.steps = gold_steps;
    t.answer = {answer ? vb::TRUE_TOK : vb::FALSE_TOK};
    t.validate();
    return t;
}

std::vector<LogicSample> gen_logic_dataset(uint64_t seed, int n, std::pair<int, int> depth_range,
                                           int distractor_count) {
    require(n >= 1, "gen_logic_dataset: n must be positive");
    require(depth_range.first >= 2 && depth_range.second <= 6 &&
                depth_range.first <= depth_range.second,
            "gen_logic_dataset: depth_range must lie within [2, 6]");
    require(distractor_count >= 0, "gen_logic_dataset: negative distractor count");
    // chain + false-target + one fresh sink per distractor
    if (depth_range.second + 2 + distractor_count > vb::N_ENT)
        throw CapacityError("gen_logic_dataset: entity pool exhausted");

    Rng rng = stream(seed, "tasks/logic");
    std::vector<LogicSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const bool truth = (i % 2) == 0;  // balanced to within 1
        const int depth = rng.range(depth_range.first, depth_range.second + 1);
        const int need = depth + 2 + distractor_count;
        std::vector<int> ents = rng.sample_indices(vb::N_ENT, need);
        for (auto& e : ents) e = vb::ent(e);

        std::vector<int> chain(ents.begin(), ents.begin() + depth + 1);
        const int false_target = ents[static_cast<size_t>(depth + 1)];
        const int target = truth ? chain.back() : false_target;

        LogicSample s;
        s.answer = truth;
        for (int k = 0; k < depth; ++k)
            s.facts.push_back({chain[static_cast<size_t>(k)], vb::IS, chain[static_cast<size_t>(k + 1)], vb::DOT});
        // Distractor edges always point at fresh sinks, so they can never
        // open a second route to the queried conclusion.
        std::vector<int> sinks;
        for (int k = 0; k < distractor_count; ++k) {
            const int v = ents[static_cast<size_t>(depth + 2 + k)];
            int u;
            if (!sinks.empty() && rng.coin()) {
                u = sinks[static_cast<size_t>(rng.below(sinks.size()))];
            } else {
                u = chain[static_cast<size_t>(rng.below(chain.size()))];
            }
            s.facts.push_back({u, vb::IS, v, vb::DOT});
            sinks.push_back(v);
        }
        rng.shuffle(s.facts);

        s.question = {chain.front(), vb::IS, target, vb::QMARK};
        for (int k = 0; k < depth; ++k)
            s.gold_steps.push_back({chain[static_cast<size_t>(k)], vb::IS, chain[static_cast<size_t>(k + 1)], vb::DOT});
        s.gold_steps.push_back({chain.front(), truth ? vb::IS : vb::NOT, target, vb::DOT});
        out.push_back(std::move(s));
    }
    rng.shuffle(out);
    return out;
}

// ------------------------------------------------------------------ mcq ----

int McqKb::lookup(int subject_tok, int relation_tok) const {
    for (size_t si = 0; si < subjects.size(); ++si) {
        if (subjects[si] != subject_tok) continue;
        for (size_t ri = 0; ri < relations.size(); ++ri)
            if (relations[ri] == relation_tok) return object[si][ri];
    }
    throw ContractError("McqKb::lookup: unknown subject/relation");
}

McqKb build_mcq_kb(uint64_t seed, int n_subjects, int n_relations) {
    require(n_subjects >= 1 && n_subjects <= vb::N_ENT, "build_mcq_kb: subject count out of range");
    require(n_relations >= 1 && n_relations <= vb::N_REL, "build_mcq_kb: relation count out of range");
    Rng rng = stream(seed, "tasks/mcq_kb");
    McqKb kb;
    kb.subjects = rng.sample_indices(vb::N_ENT, n_subjects);
    for (auto& s : kb.subjects) s = vb::ent(s);
    for (int r = 0; r < n_relations; ++r) kb.relations.push_back(vb::rel(r));
    kb.object.resize(static_cast<size_t>(n_subjects));
    for (int si = 0; si < n_subjects; ++si) {
        for (int ri = 0; ri < n_relations; ++ri) {
            int obj;
            do {
                obj = vb::ent(static_cast<int>(rng.below(vb::N_ENT)));
            } while (obj == kb.subjects[static_cast<size_t>(si)]);
            kb.object[static_cast<size_t>(si)].push_back(obj);
        }
    }
    return kb;
}

TrainingSample McqSample::to_training_sample() const {
    TrainingSample t;
    t.question = stem;
    for (int p = 0; p < 4; ++p) {
        t.question.push_back(vb::opt(p));
        t.question.insert(t.question.end(), options[static_cast<size_t>(p)].begin(),
                          options[static_cast<size_t>(p)].end());
    }
    t.steps = {{subject, relation, gold_entity, vb::DOT},
               {gold_entity, vb::AT, vb::opt(correct_pos), vb::DOT}};
    t.answer = {vb::opt(correct_pos)};
    t.validate();
    return t;
}

std::vector<McqSample> gen_mcq_dataset(uint64_t seed, int n, const McqKb& kb) {
    require(n >= 1, "gen_mcq_dataset: n must be positive");
    require(!kb.subjects.empty() && !kb.relations.empty(), "gen_mcq_dataset: empty kb");
    Rng rng = stream(seed, "tasks/mcq");
    std::vector<McqSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        McqSample s;
        const size_t si = static_cast<size_t>(rng.below(kb.subjects.size()));
        const size_t ri = static_cast<size_t>(rng.below(kb.relations.size()));
        s.subject = kb.subjects[si];
        s.relation = kb.relations[ri];
        s.gold_entity = kb.object[si][ri];
        s.stem = {s.subject, s.relation, vb::QMARK};
        s.correct_pos = static_cast<int>(rng.below(4));
        std::set<int> used = {s.gold_entity};
        for (int p = 0; p < 4; ++p) {
            if (p == s.correct_pos) {
                s.options[static_cast<size_t>(p)] = {s.gold_entity};
                continue;
            }
            int e;
            do {
                e = vb::ent(static_cast<int>(rng.below(vb::N_ENT)));
            } while (used.count(e));
            used.insert(e);
            s.options[static_cast<size_t>(p)] = {e};
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<McqSample> bias_options(const std::vector<McqSample>& data, int target_pos,
                                    double fraction, uint64_t seed) {
    require(target_pos >= 0 && target_pos < 4, "bias_options: target position out of range");
    require(fraction >= 0.0 && fraction <= 1.0, "bias_options: fraction out of [0, 1]");
    if (fraction == 0.0) return data;  // null intervention

    const int n = static_cast<int>(data.size());
    const int k = static_cast<int>(std::llround(fraction * n));
    Rng rng = stream(seed, "tasks/bias");
    std::vector<int> idx = rng.sample_indices(n, k);
    std::vector<bool> biased(static_cast<size_t>(n), false);
    for (int i : idx) biased[static_cast<size_t>(i)] = true;

    std::vector<McqSample> out = data;
    for (int i = 0; i < n; ++i) {
        McqSample& s = out[static_cast<size_t>(i)];
        int new_pos;
        if (biased[static_cast<size_t>(i)]) {
            new_pos = target_pos;
        } else {
            // spread the rest over the non-target positions so the target
            // count stays exactly round(fraction * n)
            int r = static_cast<int>(rng.below(3));
            new_pos = r >= target_pos ? r + 1 : r;
        }
        std::vector<std::vector<int>> others;
        for (int p = 0; p < 4; ++p)
            if (p != s.correct_pos) others.push_back(s.options[static_cast<size_t>(p)]);
        rng.shuffle(others);
        const std::vector<int> gold_text = s.options[static_cast<size_t>(s.correct_pos)];
        int oi = 0;
        for (int p = 0; p < 4; ++p) {
            if (p == new_pos)
                s.options[static_cast<size_t>(p)] = gold_text;
            else
                s.options[static_cast<size_t>(p)] = others[static_cast<size_t>(oi++)];
        }
        s.correct_pos = new_pos;
    }
    return out;
}

// ------------------------------------------------------------- multihop ----

TrainingSample MultiHopSample::to_training_sample() const {
    TrainingSample t;
    if (shortcut_passage)
        t.question.insert(t.question.end(), shortcut_passage->begin(), shortcut_passage->end());
    for (const auto& f : fact_sents) t.question.insert(t.question.end(), f.begin(), f.end());
    t.question.insert(t.question.end(), question.begin(), question.end());
    t.steps = {{start_entity, rel_p, hop_entity, vb::DOT},
               {hop_entity, rel_q, gold_entity, vb::DOT}};
    t.answer = {gold_entity};
    t.validate();
    return t;
}

std::vector<MultiHopSample> gen_multihop_dataset(uint64_t seed, int n, int distractor_facts) {
    require(n >= 1, "gen_multihop_dataset: n must be positive");
    require(distractor_facts >= 0, "gen_multihop_dataset: negative distractor count");
    if (3 + 2 * distractor_facts > vb::N_ENT)
        throw CapacityError("gen_multihop_dataset: entity pool exhausted");
    Rng rng = stream(seed, "tasks/multihop");
    std::vector<MultiHopSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        MultiHopSample s;
        std::vector<int> ents = rng.sample_indices(vb::N_ENT, 3 + 2 * distractor_facts);
        for (auto& e : ents) e = vb::ent(e);
        s.start_entity = ents[0];
        s.hop_entity = ents[1];
        s.gold_entity = ents[2];
        s.rel_p = vb::rel(static_cast<int>(rng.below(vb::N_REL)));
        do {
            s.rel_q = vb::rel(static_cast<int>(rng.below(vb::N_REL)));
        } while (s.rel_q == s.rel_p);

        const auto sent = [&](int u, int r, int w) {
            return std::vector<int>{u, vb::entity_descriptor(u, static_cast<int>(rng.below(3))), r, w, vb::DOT};
        };
        s.fact_sents.push_back(sent(s.start_entity, s.rel_p, s.hop_entity));
        s.fact_sents.push_back(sent(s.hop_entity, s.rel_q, s.gold_entity));
        for (int k = 0; k < distractor_facts; ++k) {
            const int u = ents[static_cast<size_t>(3 + 2 * k)];
            const int w = ents[static_cast<size_t>(3 + 2 * k + 1)];
            const int r = vb::rel(static_cast<int>(rng.below(vb::N_REL)));
            s.fact_sents.push_back(sent(u, r, w));
        }
        rng.shuffle(s.fact_sents);
        s.question = {s.start_entity, s.rel_p, s.rel_q, vb::QMARK};
        out.push_back(std::move(s));
    }
    return out;
}

MultiHopSample inject_context(const MultiHopSample& sample, int target_entity, int length) {
    require(vb::is_entity(target_entity), "inject_context: target must be an entity token");
    require(length >= 4, "inject_context: length too small for one sentence");
    if (target_entity != sample.gold_entity) {
        for (int q : sample.question)
            require(q != target_entity, "inject_context: WA target equals a question token");
    }
    MultiHopSample out = sample;
    std::vector<int> passage;
    int mentions = 0;
    int k = 0;
    while (static_cast<int>(passage.size()) < length || mentions < 3) {
        passage.push_back(target_entity);
        passage.push_back(vb::entity_descriptor(target_entity, k % 3));
        passage.push_back(vb::entity_descriptor(target_entity, (k + 1) % 3));
        passage.push_back(vb::DOT);
        mentions += 2;
        ++k;
    }
    // contract checks: no question bigram, no relation token at all
    for (int t : passage) require(!(t >= vb::REL0 && t < vb::REL0 + vb::N_REL),
                                  "inject_context: passage must not contain relations");
    for (size_t i = 0; i + 1 < passage.size(); ++i) {
        for (size_t j = 0; j + 1 < sample.question.size(); ++j) {
            require(!(passage[i] == sample.question[j] && passage[i + 1] == sample.question[j + 1]),
                    "inject_context: passage shares a bigram with the question");
        }
    }
    out.shortcut_passage = std::move(passage);
    out.shortcut_target = target_entity;
    return out;
}

// ------------------------------------------------------------- polarity ----

TrainingSample PolaritySample::to_training_sample() const {
    TrainingSample t;
    t.question = prompt;
    t.steps = {{vb::sty(cls), vb::DOT}, {vb::mark(cls), vb::DOT}};
    t.answer = reference_output;
    t.validate();
    return t;
}

std::vector<PolaritySample> gen_polarity_dataset(uint64_t seed, int n) {
    require(n >= 2 && n % 2 == 0, "gen_polarity_dataset: n must be even and >= 2");
    Rng rng = stream(seed, "tasks/polarity");
    std::vector<PolaritySample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        PolaritySample s;
        s.cls = i % 2;
        const int n_fill = 5 + static_cast<int>(rng.below(3));
        const int sty_pos = static_cast<int>(rng.below(2));
        for (int j = 0; j < n_fill; ++j) {
            if (j == sty_pos) s.prompt.push_back(vb::sty(s.cls));
            s.prompt.push_back(vb::fill(static_cast<int>(rng.below(vb::N_FILL))));
        }
        s.prompt.push_back(vb::QMARK);
        s.reference_output = {vb::mark(s.cls), vb::fill(static_cast<int>(rng.below(vb::N_FILL))),
                              vb::fill(static_cast<int>(rng.below(vb::N_FILL)))};
        out.push_back(std::move(s));
    }
    rng.shuffle(out);
    return out;
}

int judge_polarity(const std::vector<int>& output) {
    for (int t : output) {
        if (t == vb::mark(0)) return 0;
        if (t == vb::mark(1)) return 1;
    }
    return -1;
}

// ------------------------------------------------------------- helpers -----

std::vector<int> extract_answer(const std::vector<int>& generated) {
    std::vector<int> out;
    bool in_answer = false;
    for (int t : generated) {
        if (t == vb::ANS) {
            in_answer = true;
            out.clear();
            continue;
        }
        if (t == vb::EOS) break;
        if (in_answer) out.push_back(t);
    }
    return out;
}

int extract_mcq_choice(const std::vector<int>& generated) {
    for (int t : extract_answer(generated))
        if (vb::is_option(t)) return t;
    return -1;
}

int extract_entity_answer(const std::vector<int>& generated) {
    for (int t : extract_answer(generated))
        if (vb::is_entity(t)) return t;
    return -1;
}

int extract_bool_answer(const std::vector<int>& generated) {
    for (int t : extract_answer(generated))
        if (t == vb::TRUE_TOK || t == vb::FALSE_TOK) return t;
    return -1;
}

// ----------------------------------------------------------------- io ------

namespace {

void write_lines(const std::string& path, const std::vector<json>& lines) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    for (const auto& l : lines) f << l.dump() << '\n';
}

std::vector<json> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open for read: " + path);
    std::vector<json> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(json::parse(line));
    }
    return out;
}

}  // namespace

void save_logic_jsonl(const std::string& path, const std::vector<LogicSample>& data) {
    std::vector<json> lines;
    lines.reserve(data.size());
    for (const auto& s : data)
        lines.push_back(json{{"schema", 1},
                             {"facts", s.facts},
                             {"question", s.question},
                             {"steps", s.gold_steps},
                             {"answer", s.answer}});
    write_lines(path, lines);
}

std::vector<LogicSample> load_logic_jsonl(const std::string& path) {
    std::vector<LogicSample> out;
    for (const auto& j : read_lines(path)) {
        LogicSample s;
        s.facts = j.at("facts").get<std::vector<std::vector<int>>>();
        s.question = j.at("question").get<std::vector<int>>();
        s.gold_steps = j.at("steps").get<std::vector<std::vector<int>>>();
        s.answer = j.at("answer").get<bool>();
        out.push_back(std::move(s));
    }
    return out;
}

void save_mcq_jsonl(const std::string& path, const std::vector<McqSample>& data) {
    std::vector<json> lines;
    lines.reserve(data.size());
    for (const auto& s : data)
        lines.push_back(json{{"schema", 1},
                             {"stem", s.stem},
                             {"options", s.options},
                             {"correct_pos", s.correct_pos},
                             {"subject", s.subject},
                             {"relation", s.relation},
                             {"gold_entity", s.gold_entity}});
    write_lines(path, lines);
}

std::vector<McqSample> load_mcq_jsonl(const std::string& path) {
    std::vector<McqSample> out;
    for (const auto& j : read_lines(path)) {
        McqSample s;
        s.stem = j.at("stem").get<std::vector<int>>();
        s.options = j.at("options").get<std::array<std::vector<int>, 4>>();
        s.correct_pos = j.at("correct_pos").get<int>();
        s.subject = j.at("subject").get<int>();
        s.relation = j.at("relation").get<int>();
        s.gold_entity = j.at("gold_entity").get<int>();
        out.push_back(std::move(s));
    }
    return out;
}

void save_multihop_jsonl(const std::string& path, const std::vector<MultiHopSample>& data) {
    std::vector<json> lines;
    lines.reserve(data.size());
    for (const auto& s : data) {
        json j{{"schema", 1},
               {"facts", s.fact_sents},
               {"question", s.question},
               {"gold_entity", s.gold_entity},
               {"hop_entity", s.hop_entity},
               {"start_entity", s.start_entity},
               {"rel_p", s.rel_p},
               {"rel_q", s.rel_q}};
        if (s.shortcut_passage) {
            j["shortcut_passage"] = *s.shortcut_passage;
            j["shortcut_target"] = s.shortcut_target;
        }
        lines.push_back(std::move(j));
    }
    write_lines(path, lines);
}

std::vector<MultiHopSample> load_multihop_jsonl(const std::string& path) {
    std::vector<MultiHopSample> out;
    for (const auto& j : read_lines(path)) {
        MultiHopSample s;
        s.fact_sents = j.at("facts").get<std::vector<std::vector<int>>>();
        s.question = j.at("question").get<std::vector<int>>();
        s.gold_entity = j.at("gold_entity").get<int>();
        s.hop_entity = j.at("hop_entity").get<int>();
        s.start_entity = j.at("start_entity").get<int>();
        s.rel_p = j.at("rel_p").get<int>();
        s.rel_q = j.at("rel_q").get<int>();
        if (j.contains("shortcut_passage")) {
            s.shortcut_passage = j.at("shortcut_passage").get<std::vector<int>>();
            s.shortcut_target = j.at("shortcut_target").get<int>();
        }
        out.push_back(std::move(s));
    }
    return out;
}

void save_polarity_jsonl(const std::string& path, const std::vector<PolaritySample>& data) {
    std::vector<json> lines;
    lines.reserve(data.size());
    for (const auto& s : data)
        lines.push_back(json{{"schema", 1},
                             {"prompt", s.prompt},
                             {"cls", s.cls},
                             {"reference_output", s.reference_output}});
    write_lines(path, lines);
}

std::vector<PolaritySample> load_polarity_jsonl(const std::string& path) {
    std::vector<PolaritySample> out;
    for (const auto& j : read_lines(path)) {
        PolaritySample s;
        s.prompt = j.at("prompt").get<std::vector<int>>();
        s.cls = j.at("cls").get<int>();
        s.reference_output = j.at("reference_output").get<std::vector<int>>();
        out.push_back(std::move(s));
    }
    return out;
}

void save_manifest(const std::string& path, const DatasetManifest& m, uint64_t config_hash) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    json j{{"task", m.task},
           {"seed", m.seed},
           {"count", m.count},
           {"params", m.params_json.empty() ? json::object() : json::parse(m.params_json)},
           {"config_hash", hash_hex(config_hash)},
           {"version", kVersion}};
    f << j.dump(2) << '\n';
}

}  // namespace latentlab
