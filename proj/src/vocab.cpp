#include "fastturn/lm/vocab.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "fastturn/common.hpp"

namespace fastturn::lm {

using json = nlohmann::json;

Vocab::Vocab(int content_tokens) : content_(content_tokens) {
    if (content_tokens < 1) throw ConfigError("vocab: need at least one content token");
}

data::TurnState Vocab::turn_state_of(int lm_id) const {
    if (!is_turn_token(lm_id)) throw std::invalid_argument("vocab: not a turn token");
    return static_cast<data::TurnState>(lm_id - content_ - 4);
}

int Vocab::lm_of_ctc(int ctc_id) const {
    if (!representable_ctc(ctc_id))
        throw std::invalid_argument("vocab: CTC token " + std::to_string(ctc_id) + " not representable");
    return ctc_id - 1;
}

int Vocab::ctc_of_lm(int lm_id) const {
    if (lm_id < 0 || lm_id >= content_) throw std::invalid_argument("vocab: not a content token");
    return lm_id + 1;
}

std::string Vocab::text_of(int lm_id) const {
    if (lm_id < 0 || lm_id >= size()) throw std::invalid_argument("vocab: id out of range");
    if (lm_id < content_) return "tok_" + std::to_string(lm_id + 1);
    switch (lm_id - content_) {
        case 0: return "<ctc>";
        case 1: return "</ctc>";
        case 2: return "<bos>";
        case 3: return "<eos>";
        case 4: return "<complete>";
        case 5: return "<incomplete>";
        case 6: return "<backchannel>";
        case 7: return "<wait>";
    }
    return "?";
}

std::string Vocab::to_json() const {
    json j;
    j["content"] = content_;
    json toks = json::array();
    for (int i = 0; i < size(); ++i)
        toks.push_back({{"id", i}, {"text", text_of(i)}, {"special", is_special(i)}});
    j["tokens"] = toks;
    return j.dump(2);
}

Vocab Vocab::from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.contains("content") || !j["content"].is_number_integer())
        throw ConfigError("vocab json: missing integer \"content\"");
    return Vocab(j["content"].get<int>());
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write vocab: " + path);
    out << to_json() << "\n";
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocab: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

} // namespace fastturn::lm
