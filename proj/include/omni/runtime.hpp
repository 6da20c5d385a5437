#pragma once

#include <condition_variable>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "omni/model.hpp"

namespace omni {

// Thread-safe bounded FIFO. push blocks when full, pop blocks when empty and
// returns nullopt once the queue is closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity = 8) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_space_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) throw std::logic_error("push on closed queue");
    items_.push(std::move(item));
    cv_items_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_items_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop();
    cv_space_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
    cv_items_.notify_all();
    cv_space_.notify_all();
  }

 private:
  size_t capacity_;
  bool closed_ = false;
  std::queue<T> items_;
  std::mutex mu_;
  std::condition_variable cv_items_;
  std::condition_variable cv_space_;
};

struct TurnInput {
  std::optional<ImageTensor> image;
  std::optional<Waveform> audio;  // spoken question, any sample rate
  std::string text;
  int64_t max_new = 16;
};

struct LatencyReport {
  double vision_encode_ms = 0.0;
  double audio_encode_ms = 0.0;
  double prefill_ms = 0.0;      // assembly + first forward pass
  double first_token_ms = 0.0;  // turn start to first generated token
  double decode_ms = 0.0;       // remaining generation
  double synth_ms = 0.0;        // speech synthesis
  double total_ms = 0.0;
  int64_t tokens_generated = 0;
};

struct TurnOutput {
  std::vector<int64_t> reply_ids;
  std::string reply_text;
  double speech_prob = 0.0;             // modality head P(speech)
  std::optional<Waveform> speech;       // present when the speech class wins
  LatencyReport latency;
};

enum class RunMode { Sequential, Pipelined };

// Pipelined mode overlaps modality encoding, LLM decoding, and synthesis of
// consecutive turns across three threads; outputs are bit-identical to
// sequential mode.
std::vector<TurnOutput> run_turns(OmniModel& model, const std::vector<TurnInput>& turns,
                                  RunMode mode);
TurnOutput run_turn(OmniModel& model, const TurnInput& turn);

struct BenchResult {
  int64_t reps = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  std::vector<double> per_rep_ms;  // measured reps, warm-up excluded
};

// Repeats the turn list `reps` times (>= 3, else a config error) after one
// unmeasured warm-up pass; writes one ndjson row per rep plus a summary row.
BenchResult bench_latency(OmniModel& model, const std::vector<TurnInput>& turns, int64_t reps,
                          RunMode mode, const std::string& report_path);

}  // namespace omni
