#pragma once

// Multi-round Bernoulli sampling for sum metrics sum_n f_n. Round r draws only
// among points not selected in rounds 1..r-1; the combined estimator
//
//   F_{1:R} = (1/R) sum_r ( sum_{n in N_{1:r-1}} f_n + F_r ),
//   F_r     = sum_{n remaining} s_n f_n / b^r_n
//
// stays unbiased even when b^r depends on labels seen in earlier rounds.

#include <metricwise/error.hpp>
#include <metricwise/rng.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace metricwise {

inline constexpr std::uint64_t kOnlineStreamTag = 0x0a11e5eedull;

struct OnlineRound {
  std::size_t round = 0;           // 1-based
  std::vector<std::size_t> drawn;  // ascending
  std::string weights_digest;
  double partial_estimate = 0.0;   // F_r
  double prior_sum = 0.0;          // sum of f over points drawn before round r
};

// FNV-1a over the IEEE-754 bytes of the weights, as 16 hex digits.
inline std::string weights_digest(std::span<const double> weights) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (double w : weights) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &w, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      hash ^= (bits >> (8 * i)) & 0xffu;
      hash *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

class OnlineState {
 public:
  explicit OnlineState(std::size_t n) : sampled_(n, 0), f_(n, 0.0) {
    if (n == 0) throw ValidationError("online state needs at least one point");
  }

  std::size_t size() const noexcept { return sampled_.size(); }
  std::size_t rounds() const noexcept { return log_.size(); }
  const std::vector<OnlineRound>& log() const noexcept { return log_; }
  bool sampled(std::size_t n) const { return sampled_[n] != 0; }
  double f(std::size_t n) const { return f_[n]; }
  std::size_t remaining() const {
    std::size_t r = 0;
    for (auto s : sampled_) r += s ? 0 : 1;
    return r;
  }

  // `weights` has one entry per point: 0 for already-sampled points, (0,1]
  // for the rest. `label_f(n)` supplies f_n for each newly drawn point.
  // A round on an empty remainder is still logged, with F_r = 0.
  template <typename LabelFn>
  OnlineRound round(std::span<const double> weights, std::uint64_t seed,
                    LabelFn&& label_f) {
    if (weights.size() != size())
      throw InvalidWeights("weight vector length does not match the pool");
    for (std::size_t n = 0; n < size(); ++n) {
      const double w = weights[n];
      if (sampled_[n]) {
        if (w != 0.0)
          throw InvalidWeights("weight on already-sampled index " + std::to_string(n));
      } else if (!(w > 0.0 && w <= 1.0)) {
        throw InvalidWeights("weight outside (0,1] on index " + std::to_string(n));
      }
    }
    OnlineRound rec;
    rec.round = log_.size() + 1;
    rec.weights_digest = weights_digest(weights);
    for (std::size_t n = 0; n < size(); ++n)
      if (sampled_[n]) rec.prior_sum += f_[n];
    const Stream stream =
        Stream(seed).substream(kOnlineStreamTag).substream(rec.round);
    std::vector<double> values;
    for (std::size_t n = 0; n < size(); ++n) {
      if (sampled_[n] || !(stream.uniform(n) < weights[n])) continue;
      const double fn = label_f(n);
      if (!std::isfinite(fn)) throw ValidationError("label value is not finite");
      rec.drawn.push_back(n);
      values.push_back(fn);
      rec.partial_estimate += fn / weights[n];
    }
    for (std::size_t i = 0; i < rec.drawn.size(); ++i) {
      sampled_[rec.drawn[i]] = 1;
      f_[rec.drawn[i]] = values[i];
    }
    log_.push_back(rec);
    return rec;
  }

  // F_{1:R} over all completed rounds.
  double estimate() const {
    if (log_.empty()) throw DegenerateEstimate("online estimate needs a round");
    double acc = 0.0;
    for (const auto& r : log_) acc += r.prior_sum + r.partial_estimate;
    return acc / static_cast<double>(log_.size());
  }

 private:
  std::vector<std::uint8_t> sampled_;
  std::vector<double> f_;
  std::vector<OnlineRound> log_;
};

}  // namespace metricwise
