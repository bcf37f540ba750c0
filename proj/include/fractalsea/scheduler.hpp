#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace fractalsea {

using TaskId = std::uint32_t;
using DependencyList = std::vector<std::vector<TaskId>>; // deps[i] = tasks that must finish before i

// Kahn topological order; ready tasks are released lowest id first. Throws PlanError on a cycle
// or on a dependency naming a missing task.
std::vector<TaskId> topological_order(const DependencyList &deps);

// Number of tasks on the longest dependency chain (0 for an empty graph).
int longest_chain(const DependencyList &deps);

// Runs fn(task) for every task once all of its dependencies have returned. Up to `workers`
// tasks run concurrently. The first exception stops dispatch of new tasks; it is rethrown as
// TaskError carrying the task id once in-flight tasks have drained.
void run_dag(const DependencyList &deps, unsigned workers, const std::function<void(TaskId)> &fn);

} // namespace fractalsea
