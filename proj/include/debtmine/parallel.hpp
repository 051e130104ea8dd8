#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace debtmine {

/// Selects the OpenMP kernel or its serial reference. Both produce identical
/// results: every task derives its own random stream and writes its own slot.
enum class Execution { serial, parallel };

/// Runs fn(0..count-1). In parallel mode an exception from any task is
/// rethrown after the loop; the lowest failing task index wins so the
/// reported error does not depend on scheduling.
template <class Fn>
void for_each_task(std::size_t count, Execution exec, Fn&& fn) {
    if (exec == Execution::serial || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace debtmine
