#ifndef CSHC_CORE_HPP
#define CSHC_CORE_HPP

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cshc {

/// Base of every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data.
class DataError : public Error {
public:
    enum class Kind { missing_column, non_numeric, non_finite, empty, single_class, too_few_samples, dimension, other };

    DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dense row-major matrix. Only what the library needs.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T value = T{}) : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void append_row(std::span<const T> values)
    {
        if (rows_ == 0 && cols_ == 0)
            cols_ = values.size();
        assert(values.size() == cols_);
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    Matrix select_rows(std::span<const std::size_t> indices) const
    {
        Matrix out(indices.size(), cols_);
        for (std::size_t i = 0; i < indices.size(); ++i)
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                        out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
        return out;
    }

    const std::vector<T>& data() const noexcept { return data_; }
    std::vector<T>& data() noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

// Random numbers -------------------------------------------------------------
//
// All randomness flows through std::mt19937_64 (fully specified by the
// standard, so streams are identical across platforms). Bounded draws are
// done here rather than through <random> distributions, whose algorithms are
// implementation-defined.

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept
{
    return derive_seed(derive_seed(seed, a), b);
}

/// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
    assert(n > 0);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void shuffle(std::vector<T>& values, Rng& rng)
{
    for (std::size_t i = values.size(); i > 1; --i)
        std::swap(values[i - 1], values[uniform_index(rng, i)]);
}

// Ranking --------------------------------------------------------------------

/// Ranks with 1 = smallest value and ties sharing the mean of the ranks they span.
inline std::vector<double> average_ranks_ascending(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]])
            ++j;
        const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t)
            ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

/// Index of the largest value; ties go to the lowest index.
template <class T>
std::size_t argmax_lowest(std::span<const T> values)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best])
            best = i;
    return best;
}

// Parallelism ----------------------------------------------------------------

inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested != 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// statically strided, so the result of each item never depends on scheduling.
/// The first exception thrown by any item is rethrown after all workers join.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body)
{
    threads = std::min(resolve_threads(threads), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < n; i += threads)
                        body(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace cshc

#endif
