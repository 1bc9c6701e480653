#include "hydrofit/types.hpp"

#include <cmath>
#include <cstring>

namespace hydrofit {

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::Inflation: return "inflation";
        case Phase::Deflation: return "deflation";
        case Phase::Mixed: return "mixed";
    }
    return "mixed";
}

namespace {

void require_finite(double x, const char* name) {
    if (!std::isfinite(x)) {
        throw InvariantError(std::string("sample field '") + name + "' is not finite");
    }
}

}  // namespace

Sample::Sample(double t_, double v_, double v_dot_, double v_ddot_, double p_)
    : t(t_), v(v_), v_dot(v_dot_), v_ddot(v_ddot_), p(p_) {
    require_finite(t, "t");
    require_finite(v, "v");
    require_finite(v_dot, "v_dot");
    require_finite(v_ddot, "v_ddot");
    require_finite(p, "p");
    if (v < 0.0) {
        throw InvariantError("sample volume must be >= 0, got " + std::to_string(v));
    }
}

Trajectory::Trajectory(std::vector<Sample> samples, double sample_rate_hz, int cycle_id,
                       Phase phase, bool has_vdot, bool has_vddot)
    : samples_(std::move(samples)),
      sample_rate_hz_(sample_rate_hz),
      cycle_id_(cycle_id),
      phase_(phase),
      has_vdot_(has_vdot),
      has_vddot_(has_vddot) {
    if (samples_.empty()) {
        throw InvariantError("trajectory must contain at least one sample");
    }
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
        throw InvariantError("sample_rate_hz must be positive and finite");
    }
    const double nominal_dt = 1.0 / sample_rate_hz_;
    for (std::size_t i = 1; i < samples_.size(); ++i) {
        const double dt = samples_[i].t - samples_[i - 1].t;
        if (dt <= 0.0) {
            throw InvariantError("samples not strictly increasing in t at index " +
                                 std::to_string(i));
        }
        if (std::abs(dt - nominal_dt) > 0.10 * nominal_dt) {
            throw InvariantError("sample spacing " + std::to_string(dt) + " s at index " +
                                 std::to_string(i) + " deviates more than 10% from nominal " +
                                 std::to_string(nominal_dt) + " s");
        }
    }
}

Dataset::Dataset(std::vector<Trajectory> trajs, int chamber,
                 std::map<std::string, std::string> meta)
    : trajectories(std::move(trajs)), chamber_id(chamber), metadata(std::move(meta)) {
    if (trajectories.empty()) {
        throw InvariantError("dataset must contain at least one trajectory");
    }
}

std::size_t Dataset::n_samples() const {
    std::size_t n = 0;
    for (const auto& traj : trajectories) n += traj.size();
    return n;
}

bool Dataset::has_vdot() const {
    for (const auto& traj : trajectories) {
        if (!traj.has_vdot()) return false;
    }
    return !trajectories.empty();
}

bool Dataset::has_vddot() const {
    for (const auto& traj : trajectories) {
        if (!traj.has_vddot()) return false;
    }
    return !trajectories.empty();
}

namespace {

// FNV-1a, 64-bit. Stable across platforms for identical input bytes.
struct Fnv1a {
    std::uint64_t state = 0xcbf29ce484222325ull;

    void feed(const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state ^= bytes[i];
            state *= 0x100000001b3ull;
        }
    }
    void feed_f64(double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        feed(&bits, sizeof(bits));
    }
    void feed_i64(std::int64_t x) { feed(&x, sizeof(x)); }
    void feed_str(const std::string& s) {
        feed_i64(static_cast<std::int64_t>(s.size()));
        feed(s.data(), s.size());
    }
};

}  // namespace

std::string dataset_fingerprint(const Dataset& ds) {
    Fnv1a h;
    h.feed_i64(ds.chamber_id);
    h.feed_i64(static_cast<std::int64_t>(ds.metadata.size()));
    for (const auto& [key, value] : ds.metadata) {  // std::map iterates sorted
        h.feed_str(key);
        h.feed_str(value);
    }
    h.feed_i64(static_cast<std::int64_t>(ds.trajectories.size()));
    for (const auto& traj : ds.trajectories) {
        h.feed_i64(traj.cycle_id());
        h.feed_i64(static_cast<std::int64_t>(traj.phase()));
        h.feed_f64(traj.sample_rate_hz());
        h.feed_i64(traj.has_vdot() ? 1 : 0);
        h.feed_i64(traj.has_vddot() ? 1 : 0);
        h.feed_i64(static_cast<std::int64_t>(traj.size()));
        for (const Sample& s : traj.samples()) {
            h.feed_f64(s.t);
            h.feed_f64(s.v);
            h.feed_f64(s.v_dot);
            h.feed_f64(s.v_ddot);
            h.feed_f64(s.p);
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.state));
    return std::string(buf);
}

}  // namespace hydrofit
