#include "fractalsea/scheduler.hpp"

#include "fractalsea/error.hpp"

#include <algorithm>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>

namespace fractalsea {

namespace {

struct Graph {
    std::vector<std::vector<TaskId>> dependents;
    std::vector<std::size_t> indegree;
};

Graph build_graph(const DependencyList &deps) {
    Graph g;
    const std::size_t n = deps.size();
    g.dependents.resize(n);
    g.indegree.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (TaskId d : deps[i]) {
            if (d >= n) throw PlanError("task " + std::to_string(i) + " depends on unknown task " + std::to_string(d));
            if (d == i) throw PlanError("task " + std::to_string(i) + " depends on itself");
            g.dependents[d].push_back(static_cast<TaskId>(i));
            ++g.indegree[i];
        }
    return g;
}

using MinHeap = std::priority_queue<TaskId, std::vector<TaskId>, std::greater<>>;

} // namespace

std::vector<TaskId> topological_order(const DependencyList &deps) {
    Graph g = build_graph(deps);
    MinHeap ready;
    for (std::size_t i = 0; i < deps.size(); ++i)
        if (g.indegree[i] == 0) ready.push(static_cast<TaskId>(i));
    std::vector<TaskId> order;
    order.reserve(deps.size());
    while (!ready.empty()) {
        const TaskId t = ready.top();
        ready.pop();
        order.push_back(t);
        for (TaskId s : g.dependents[t])
            if (--g.indegree[s] == 0) ready.push(s);
    }
    if (order.size() != deps.size()) throw PlanError("dependency graph contains a cycle");
    return order;
}

int longest_chain(const DependencyList &deps) {
    const auto order = topological_order(deps);
    std::vector<int> depth(deps.size(), 1);
    int best = 0;
    for (TaskId t : order) {
        for (TaskId d : deps[t]) depth[t] = std::max(depth[t], depth[d] + 1);
        best = std::max(best, depth[t]);
    }
    return best;
}

void run_dag(const DependencyList &deps, unsigned workers, const std::function<void(TaskId)> &fn) {
    const auto order = topological_order(deps); // rejects cycles before anything runs
    if (workers <= 1) {
        for (TaskId t : order) {
            try {
                fn(t);
            } catch (const TaskError &) {
                throw;
            } catch (const std::exception &e) {
                throw TaskError(t, e.what());
            }
        }
        return;
    }

    Graph g = build_graph(deps);
    MinHeap ready;
    for (std::size_t i = 0; i < deps.size(); ++i)
        if (g.indegree[i] == 0) ready.push(static_cast<TaskId>(i));

    std::mutex mu;
    std::condition_variable cv;
    std::size_t finished = 0, running = 0;
    bool failed = false;
    TaskId failed_task = 0;
    std::string failure;

    auto worker = [&] {
        std::unique_lock lock(mu);
        for (;;) {
            cv.wait(lock, [&] { return failed || !ready.empty() || finished == deps.size() || (running == 0 && ready.empty()); });
            if (failed || ready.empty()) return;
            const TaskId t = ready.top();
            ready.pop();
            ++running;
            lock.unlock();
            std::string error;
            bool ok = true;
            try {
                fn(t);
            } catch (const std::exception &e) {
                ok = false;
                error = e.what();
            } catch (...) {
                ok = false;
                error = "unknown error";
            }
            lock.lock();
            --running;
            if (!ok) {
                if (!failed) {
                    failed = true;
                    failed_task = t;
                    failure = error;
                }
            } else {
                ++finished;
                for (TaskId s : g.dependents[t])
                    if (--g.indegree[s] == 0) ready.push(s);
            }
            cv.notify_all();
        }
    };

    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(deps.size(), 1)));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto &th : pool) th.join();
    if (failed) throw TaskError(failed_task, failure);
}

} // namespace fractalsea
