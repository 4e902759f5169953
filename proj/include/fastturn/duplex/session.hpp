#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fastturn/engine.hpp"

namespace fastturn::duplex {

enum class DuplexAction { Respond, KeepListening, IgnoreBackchannel, HoldAndWait };

// Fixed total mapping from turn state to dialogue action.
DuplexAction policy(data::TurnState state);
const char* to_string(DuplexAction a);

struct DecisionRecord {
    data::TurnState state = data::TurnState::Complete;
    double confidence = 0.0;
    double t_decision_ms = 0.0;
    double t_segment_end_ms = 0.0;
    bool early = false;
    long frames_consumed_at_decision = 0;
    std::array<double, 4> probs{};
};

// max(0, decision - segment end); early decisions clamp to zero and report
// their margin through lead_time_ms instead.
double latency_ms(const DecisionRecord& r);
double lead_time_ms(const DecisionRecord& r);

// Injected monotonic clock so tests can replay sessions deterministically.
struct Clock {
    virtual ~Clock() = default;
    virtual double now_ms() = 0;
};

class SteadyClock final : public Clock {
public:
    SteadyClock();
    double now_ms() override;

private:
    double t0_;
};

struct ManualClock final : public Clock {
    double t = 0.0;
    double now_ms() override { return t; }
};

struct SessionOptions {
    EngineMode mode = EngineMode::Unified;
    double tau = 0.9;
    int k_consecutive = 2;
    bool early_exit = true;
};

struct SessionEvent {
    double t_ms = 0.0;
    std::string type; // transcript_update | early_decision | final_decision
    std::string payload_json;
};

// One full-duplex stream. Frames go in (any slice size; an internal buffer
// respects the encoder's chunk size), transcript updates and an optional
// early decision come out; finalize_segment closes the stream and returns the
// committed record. Decisions are never revised once committed.
class Session {
public:
    Session(const Engine& eng, SessionOptions opt, Clock& clock);

    std::vector<SessionEvent> feed_frames(const data::FeatureMatrix& frames, double arrival_ms);
    std::vector<SessionEvent> feed_frames(const double* frames, int n_frames, double arrival_ms);
    DecisionRecord finalize_segment(double t_segment_end_ms);

    const std::vector<int>& transcript() const { return greedy_.transcript; }
    long frames_fed() const { return frames_fed_; }
    bool decided() const { return committed_.has_value(); }
    bool finalized() const { return finalized_; }

private:
    void process_chunk(const double* frames, int n, bool final_chunk, std::vector<SessionEvent>& events);
    Decision evaluate_evidence() const;
    nn::Tensor rows_tensor(const std::vector<double>& rows) const;

    const Engine* eng_;
    SessionOptions opt_;
    Clock* clock_;
    enc::StreamingEncoder enc_;
    ctc::GreedyState greedy_;
    std::vector<double> pending_;   // buffered input frames
    std::vector<double> top_rows_;  // accumulated evidence
    std::vector<double> mid_rows_;
    int out_rows_ = 0;
    long frames_fed_ = 0;
    bool finalized_ = false;
    int consec_ = 0;
    int consec_state_ = -1;
    std::optional<DecisionRecord> committed_;
};

} // namespace fastturn::duplex
