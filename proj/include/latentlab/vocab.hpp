#pragma once

#include <string>
#include <vector>

namespace latentlab::vocab {

// Fixed synthetic token table shared by every task.
inline constexpr int PAD = 0;
inline constexpr int EOS = 1;
inline constexpr int ANS = 2;   // answer marker
inline constexpr int BOT = 3;   // begin-of-thought
inline constexpr int EOT = 4;   // end-of-thought
inline constexpr int LATENT = 5;  // latent-slot placeholder in serialized sequences
inline constexpr int QMARK = 6;
inline constexpr int IS = 7;
inline constexpr int NOT = 8;
inline constexpr int TRUE_TOK = 9;
inline constexpr int FALSE_TOK = 10;
inline constexpr int DOT = 11;
inline constexpr int AT = 12;

inline constexpr int OPT0 = 16;   // option letters A..D: 16..19
inline constexpr int N_OPT = 4;
inline constexpr int REL0 = 20;   // relations: 20..27
inline constexpr int N_REL = 8;
inline constexpr int STY0 = 28;   // polarity style keywords: 28..29
inline constexpr int MARK0 = 30;  // polarity answer markers: 30..31
inline constexpr int FILL0 = 32;  // filler words: 32..47
inline constexpr int N_FILL = 16;
inline constexpr int DESC0 = 48;  // descriptors: 48..71
inline constexpr int N_DESC = 24;
inline constexpr int ENT0 = 72;   // entities: 72..199
inline constexpr int N_ENT = 128;

inline constexpr int SIZE = ENT0 + N_ENT;  // 200 live tokens; the model vocab may be larger

inline constexpr int opt(int pos) { return OPT0 + pos; }
inline constexpr int rel(int i) { return REL0 + i; }
inline constexpr int sty(int c) { return STY0 + c; }
inline constexpr int mark(int c) { return MARK0 + c; }
inline constexpr int fill(int i) { return FILL0 + i; }
inline constexpr int desc(int i) { return DESC0 + i; }
inline constexpr int ent(int i) { return ENT0 + i; }

inline constexpr bool is_entity(int t) { return t >= ENT0 && t < ENT0 + N_ENT; }
inline constexpr bool is_option(int t) { return t >= OPT0 && t < OPT0 + N_OPT; }
inline constexpr bool is_marker(int t) { return t == MARK0 || t == MARK0 + 1; }
inline constexpr bool is_descriptor(int t) { return t >= DESC0 && t < DESC0 + N_DESC; }

/// The j-th descriptor (j in 0..2) conventionally associated with an entity.
int entity_descriptor(int entity_tok, int j);

std::string name(int tok);
std::string render(const std::vector<int>& toks);

}  // namespace latentlab::vocab
