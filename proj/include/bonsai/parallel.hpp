#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace bonsai {

/// Kernels take an execution policy. `serial` is the reference path the tests
/// compare the OpenMP path against.
enum class Exec { serial, parallel };

/// Runs fn(i) for i in [0, n). Exceptions are captured per index and the one
/// with the lowest index is rethrown after all work finishes, so failures are
/// deterministic regardless of scheduling.
template <class Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
    if (exec == Exec::serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Number of OpenMP threads a parallel region would use.
int max_threads();
void set_threads(int n);

}  // namespace bonsai
