#pragma once

namespace air {

// Thin wrappers over the OpenMP runtime. With OpenMP disabled every call
// reports a single thread.
int max_threads();
void set_threads(int n);

// Restores the previous thread count on scope exit.
class ThreadScope {
public:
    explicit ThreadScope(int n) : previous_(max_threads()) { set_threads(n); }
    ~ThreadScope() { set_threads(previous_); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;

private:
    int previous_;
};

}  // namespace air
