#pragma once

#include <functional>

namespace pnpmpc {

/// Worker cap: PNP_DEMPC_THREADS when set (>= 1), else hardware concurrency.
int worker_cap();

/// Runs fn(0..n-1) across up to worker_cap() threads. Tasks must write only
/// to their own slots; exceptions are rethrown on the caller thread.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace pnpmpc
