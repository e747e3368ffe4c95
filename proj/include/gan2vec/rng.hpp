#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace gan2vec {

// splitmix64 step; used to derive independent stream seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// FNV-1a hash of a stream name, mixed with the master seed so that
// rng("noise") and rng("shuffle") never collide and each master seed
// yields a fully distinct family of streams.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& stream) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::uint64_t s = master ^ h;
    // A couple of splitmix rounds to decorrelate nearby masters.
    splitmix64(s);
    return splitmix64(s);
}

// Thin wrapper over mt19937_64 with exact state save/restore (used by
// checkpoints so a resumed run continues the identical random sequence).
class Rng {
  public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, const std::string& stream) : engine_(derive_seed(master, stream)) {}

    std::mt19937_64& engine() { return engine_; }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    // Inclusive range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    // mt19937_64 defines exact textual serialization; round-trips bit-identically.
    std::string save_state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }
    void load_state(const std::string& text) {
        std::istringstream is(text);
        is >> engine_;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace gan2vec
