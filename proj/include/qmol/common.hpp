#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qmol {

// -- error taxonomy -----------------------------------------------------
// Each exception maps to one error class named in the module contracts.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidGateError : Error { using Error::Error; };
struct InvalidQubitError : Error { using Error::Error; };
struct ArityError : Error { using Error::Error; };
struct DegenerateEmbeddingError : Error { using Error::Error; };
struct UnsupportedParametrizationError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct CacheMismatchError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ValidityError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct EmptyCorpusError : Error { using Error::Error; };
struct CorruptCacheError : Error { using Error::Error; };
struct UndefinedTestError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };
struct UnsupportedPenaltyError : Error { using Error::Error; };
struct EmptyReportError : Error { using Error::Error; };

// Parse failure for the SMILES subset; carries the offending byte offset.
struct UnsupportedFeatureError : Error {
    std::size_t position;
    UnsupportedFeatureError(const std::string& what, std::size_t pos)
        : Error(what + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

// -- deterministic RNG --------------------------------------------------
// splitmix64 core with hand-rolled uniform/normal draws so that streams
// are identical across standard libraries and platforms.

class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) { return n ? next_u64() % n : 0; }

    // standard normal via Box-Muller (second value cached)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // independent child stream, for per-sample reproducibility
    Rng fork(std::uint64_t salt) {
        return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// -- hashing ------------------------------------------------------------

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw ArityError("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Static-partition parallel map over [0, n). Each index owns its output
// slot, so results are identical to serial execution for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace qmol
