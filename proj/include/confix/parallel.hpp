#pragma once

#include <functional>

namespace confix {

/// Worker count: CONFIX_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Overrides worker_count() for the calling process; 0 restores the default.
void set_worker_count(int n);

/// Calls body(i) for every i in [0, n). Work is handed out dynamically, so
/// body must only write to slots owned by its index.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace confix
