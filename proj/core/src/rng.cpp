#include "rtwin/rng.hpp"

namespace rtwin {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng make_stream(std::uint64_t master_seed, Stream stream) {
    std::uint64_t state = master_seed ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL);
    std::seed_seq seq{splitmix64(state), splitmix64(state), splitmix64(state), splitmix64(state)};
    return Rng(seq);
}

}  // namespace rtwin
