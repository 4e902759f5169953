#pragma once

#include <string>
#include <vector>

#include "fastturn/data/turn_state.hpp"

namespace fastturn::lm {

// LM token space: the corpus content symbols followed by the special tokens.
// CTC uses ids 1..content (0 = blank); the LM maps content symbol c to c-1.
class Vocab {
public:
    explicit Vocab(int content_tokens);

    int content() const { return content_; }
    int size() const { return content_ + 8; }

    int ctc_open() const { return content_; }
    int ctc_close() const { return content_ + 1; }
    int bos() const { return content_ + 2; }
    int eos() const { return content_ + 3; }

    int turn_token(data::TurnState s) const { return content_ + 4 + static_cast<int>(s); }
    int first_turn_token() const { return content_ + 4; }
    bool is_turn_token(int lm_id) const { return lm_id >= content_ + 4 && lm_id < content_ + 8; }
    data::TurnState turn_state_of(int lm_id) const;

    bool is_special(int lm_id) const { return lm_id >= content_; }
    bool representable_ctc(int ctc_id) const { return ctc_id >= 1 && ctc_id <= content_; }

    int lm_of_ctc(int ctc_id) const; // ctc content id (>=1) -> lm id
    int ctc_of_lm(int lm_id) const;  // inverse

    std::string text_of(int lm_id) const;

    std::string to_json() const;
    static Vocab from_json(const std::string& text);
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    int content_;
};

} // namespace fastturn::lm
