#include "latentlab/vocab.hpp"

#include "latentlab/common.hpp"

namespace latentlab::vocab {

int entity_descriptor(int entity_tok, int j) {
    require(is_entity(entity_tok), "entity_descriptor: not an entity token");
    require(j >= 0 && j < 3, "entity_descriptor: j in 0..2");
    const int e = entity_tok - ENT0;
    return desc((e * 3 + j) % N_DESC);
}

std::string name(int tok) {
    switch (tok) {
        case PAD: return "<pad>";
        case EOS: return "<eos>";
        case ANS: return "=>";
        case BOT: return "<bot>";
        case EOT: return "<eot>";
        case LATENT: return "<latent>";
        case QMARK: return "?";
        case IS: return "is";
        case NOT: return "not";
        case TRUE_TOK: return "true";
        case FALSE_TOK: return "false";
        case DOT: return ".";
        case AT: return "at";
        default: break;
    }
    if (is_option(tok)) return std::string(1, static_cast<char>('A' + tok - OPT0));
    if (tok >= REL0 && tok < REL0 + N_REL) return "rel" + std::to_string(tok - REL0);
    if (tok == STY0) return "styA";
    if (tok == STY0 + 1) return "styB";
    if (tok == MARK0) return "@joy";
    if (tok == MARK0 + 1) return "@flat";
    if (tok >= FILL0 && tok < FILL0 + N_FILL) return "f" + std::to_string(tok - FILL0);
    if (is_descriptor(tok)) return "d" + std::to_string(tok - DESC0);
    if (is_entity(tok)) return "e" + std::to_string(tok - ENT0);
    return "<tok" + std::to_string(tok) + ">";
}

std::string render(const std::vector<int>& toks) {
    std::string out;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += name(toks[i]);
    }
    return out;
}

}  // namespace latentlab::vocab
