#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace petdiff {

// Seed derivation for hierarchical streams. Every consumer of randomness owns
// a stream derived from (root seed, tag, indices), so thread scheduling can
// never reorder draws between consumers.
uint64_t derive_seed(uint64_t root, std::string_view tag);
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a);
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a, uint64_t b);

// mt19937_64 engine with hand-rolled transforms. The std distributions are
// implementation-defined, these are not, so streams replay bit-exactly.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : eng_(seed) {}

    double uniform();      // [0,1)
    double uniform_pos();  // (0,1]
    double normal();       // Box-Muller, pair cached
    double uniform_range(double lo, double hi);
    uint64_t poisson(double lambda);
    uint64_t next_u64() { return eng_(); }
    // one int in [0, n)
    uint64_t index(uint64_t n);

    void fill_normal(float* dst, size_t count);

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace petdiff
