#include "fastturn/duplex/session.hpp"

#include <chrono>
#include <json.hpp>
#include <stdexcept>

namespace fastturn::duplex {

using json = nlohmann::json;
using nn::Tensor;

DuplexAction policy(data::TurnState state) {
    switch (state) {
        case data::TurnState::Complete: return DuplexAction::Respond;
        case data::TurnState::Incomplete: return DuplexAction::KeepListening;
        case data::TurnState::Backchannel: return DuplexAction::IgnoreBackchannel;
        case data::TurnState::Wait: return DuplexAction::HoldAndWait;
    }
    return DuplexAction::KeepListening;
}

const char* to_string(DuplexAction a) {
    switch (a) {
        case DuplexAction::Respond: return "respond";
        case DuplexAction::KeepListening: return "keep_listening";
        case DuplexAction::IgnoreBackchannel: return "ignore_backchannel";
        case DuplexAction::HoldAndWait: return "hold_and_wait";
    }
    return "?";
}

double latency_ms(const DecisionRecord& r) { return std::max(0.0, r.t_decision_ms - r.t_segment_end_ms); }
double lead_time_ms(const DecisionRecord& r) { return std::max(0.0, r.t_segment_end_ms - r.t_decision_ms); }

SteadyClock::SteadyClock()
    : t0_(std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now().time_since_epoch())
              .count()) {}

double SteadyClock::now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
               .count() -
           t0_;
}

Session::Session(const Engine& eng, SessionOptions opt, Clock& clock)
    : eng_(&eng), opt_(opt), clock_(&clock), enc_(eng.params, eng.cfg.encoder) {}

Tensor Session::rows_tensor(const std::vector<double>& rows) const {
    const int d = eng_->cfg.encoder.model_dim;
    const int n = static_cast<int>(rows.size()) / d;
    return Tensor({n, d}, rows);
}

Decision Session::evaluate_evidence() const {
    return decide(*eng_, opt_.mode, rows_tensor(top_rows_), rows_tensor(mid_rows_), greedy_.transcript);
}

std::vector<SessionEvent> Session::feed_frames(const data::FeatureMatrix& frames, double arrival_ms) {
    if (frames.num_frames > 0 && frames.dim != eng_->cfg.encoder.feature_dim)
        throw std::invalid_argument("feed_frames: feature dim mismatch");
    return feed_frames(frames.values.data(), frames.num_frames, arrival_ms);
}

std::vector<SessionEvent> Session::feed_frames(const double* frames, int n_frames, double arrival_ms) {
    if (finalized_) throw std::logic_error("feed_frames: session already finalized");
    (void)arrival_ms;
    const int fd = eng_->cfg.encoder.feature_dim;
    const int cf = eng_->cfg.encoder.chunk_frames;
    pending_.insert(pending_.end(), frames, frames + static_cast<std::size_t>(n_frames) * fd);
    frames_fed_ += n_frames;

    std::vector<SessionEvent> events;
    while (static_cast<int>(pending_.size()) / fd >= cf) {
        process_chunk(pending_.data(), cf, false, events);
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(cf) * fd);
    }
    return events;
}

void Session::process_chunk(const double* frames, int n, bool final_chunk, std::vector<SessionEvent>& events) {
    enc::StreamingEncoder::ChunkOut out = enc_.encode_chunk(frames, n, final_chunk);
    const int new_rows = out.top.rows();
    if (new_rows > 0) {
        top_rows_.insert(top_rows_.end(), out.top.v.begin(), out.top.v.end());
        mid_rows_.insert(mid_rows_.end(), out.mid.v.begin(), out.mid.v.end());
        out_rows_ += new_rows;

        // greedy decode over the new head rows
        const Tensor lp = eng_->ctc_log_probs(out.top);
        std::vector<int> emitted;
        for (int i = 0; i < lp.rows(); ++i) {
            auto e = ctc::greedy_step(greedy_, lp.row(i), lp.cols());
            emitted.insert(emitted.end(), e.begin(), e.end());
        }
        if (!emitted.empty()) {
            json payload = {{"new_tokens", emitted}, {"transcript_len", greedy_.transcript.size()}};
            events.push_back({clock_->now_ms(), "transcript_update", payload.dump()});
        }
    }

    if (committed_ || !opt_.early_exit) return;
    if (out_rows_ == 0) return;
    // no evidence, no commit: a cascaded engine with an empty transcript has
    // nothing to read
    if (opt_.mode == EngineMode::Cascaded && greedy_.transcript.empty()) {
        consec_ = 0;
        consec_state_ = -1;
        return;
    }
    const Decision d = evaluate_evidence();
    const int st = static_cast<int>(d.state);
    // Incomplete is the keep-listening state; an early commit would freeze a
    // prefix judgment, so only the other three states can commit early.
    if (d.confidence >= opt_.tau && d.state != data::TurnState::Incomplete && (consec_ == 0 || st == consec_state_)) {
        consec_state_ = st;
        ++consec_;
    } else {
        consec_ = 0;
        consec_state_ = -1;
    }
    if (consec_ >= opt_.k_consecutive) {
        DecisionRecord rec;
        rec.state = d.state;
        rec.confidence = d.confidence;
        rec.probs = d.probs;
        rec.t_decision_ms = clock_->now_ms();
        rec.frames_consumed_at_decision = enc_.frames_consumed();
        rec.early = true; // re-checked against the final frame count at finalize
        committed_ = rec;
        json payload = {{"state", data::to_string(d.state)}, {"confidence", d.confidence}};
        events.push_back({rec.t_decision_ms, "early_decision", payload.dump()});
    }
}

DecisionRecord Session::finalize_segment(double t_segment_end_ms) {
    if (finalized_) throw std::logic_error("finalize_segment: already finalized");
    if (frames_fed_ < 1) throw std::invalid_argument("finalize_segment: no frames consumed");
    finalized_ = true;

    std::vector<SessionEvent> events; // tail events are folded into the record
    const int fd = eng_->cfg.encoder.feature_dim;
    process_chunk(pending_.data(), static_cast<int>(pending_.size()) / fd, true, events);
    pending_.clear();

    if (committed_) {
        committed_->t_segment_end_ms = t_segment_end_ms;
        committed_->early = committed_->frames_consumed_at_decision < frames_fed_;
        return *committed_;
    }

    const Decision d = evaluate_evidence();
    DecisionRecord rec;
    rec.state = d.state;
    rec.confidence = d.confidence;
    rec.probs = d.probs;
    rec.t_decision_ms = clock_->now_ms();
    rec.t_segment_end_ms = t_segment_end_ms;
    rec.frames_consumed_at_decision = frames_fed_;
    rec.early = false;
    committed_ = rec;
    return rec;
}

} // namespace fastturn::duplex
