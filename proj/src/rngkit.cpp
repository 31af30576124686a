#include "misim/rngkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace misim::rng {

namespace {

// SplitMix64 finalizer; the core non-linear mixer for keys and output.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kLane0 = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kLane1 = 0xd1b54a32d192ed03ULL;

struct Key128 {
    std::uint64_t h0;
    std::uint64_t h1;

    void absorb(std::uint64_t word) {
        h0 = mix64(h0 ^ word);
        h1 = mix64(h1 + word * kLane0);
    }

    void absorb_bytes(const char* data, std::size_t len) {
        std::size_t i = 0;
        for (; i + 8 <= len; i += 8) {
            std::uint64_t w;
            std::memcpy(&w, data + i, 8);
            absorb(w);
        }
        std::uint64_t tail = 0;
        std::memcpy(&tail, data + i, len - i);
        absorb(tail);
        absorb(static_cast<std::uint64_t>(len));
    }
};

void absorb_label(Key128& k, const std::string& tag, std::int64_t index) {
    k.absorb(static_cast<std::uint64_t>(tag.size()));
    k.absorb_bytes(tag.data(), tag.size());
    k.absorb(static_cast<std::uint64_t>(index));
}

}  // namespace

std::string StreamPath::to_string() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (i) out << '/';
        out << labels_[i].first << ':' << labels_[i].second;
    }
    return out.str();
}

StreamPath StreamPath::parse(const std::string& text) {
    StreamPath p;
    if (text.empty()) return p;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t slash = text.find('/', pos);
        std::string part = text.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
        std::size_t colon = part.rfind(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("StreamPath::parse: missing ':' in label '" + part + "'");
        p = p.child(part.substr(0, colon), std::stoll(part.substr(colon + 1)));
        if (slash == std::string::npos) break;
        pos = slash + 1;
    }
    return p;
}

Stream derive_stream(MasterSeed seed, const StreamPath& path) {
    if (path.empty()) throw std::invalid_argument("derive_stream: path must be non-empty");
    Key128 k{kLane0, kLane1};
    k.absorb(seed.value);
    for (const auto& [tag, index] : path.labels()) absorb_label(k, tag, index);
    return Stream(k.h0, k.h1);
}

Stream Stream::child(const std::string& tag, std::int64_t index) const {
    Key128 k{key0_, key1_};
    absorb_label(k, tag, index);
    return Stream(k.h0, k.h1);
}

std::uint64_t Stream::next_u64() {
    std::uint64_t x = mix64(counter_++ + key0_);
    return mix64(x ^ key1_);
}

double Stream::next_uniform() {
    // (k + 0.5) / 2^53 with k uniform on [0, 2^53): open interval, 53 bits.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
}

double Stream::next_normal() { return inverse_normal_cdf(next_uniform()); }

std::uint64_t Stream::uniform_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        std::uint64_t r = next_u64();
        if (r >= threshold) return r % bound;
    }
}

std::vector<double> draw_normal(Stream& s, std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = s.next_normal();
    return out;
}

std::vector<std::size_t> sample_without_replacement(Stream& s, std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(s.uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Wichura (1988), algorithm AS241, PPND16.
double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("inverse_normal_cdf: p outside [0,1]");
    }
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

}  // namespace misim::rng
