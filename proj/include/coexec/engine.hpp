#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <queue>
#include <span>
#include <thread>
#include <vector>

#include "coexec/core.hpp"
#include "coexec/error.hpp"
#include "coexec/schedulers.hpp"
#include "coexec/workloads.hpp"

namespace coexec {

struct EngineConfig {
  std::vector<DeviceProfile> devices;
  SchedulerConfig scheduler;
  ClockMode clock_mode = ClockMode::Virtual;
  std::uint64_t seed = 0;
  bool exclude_init_from_total = false;
};

struct RunResult {
  std::vector<std::vector<std::byte>> outputs;
  ExecutionTrace trace;
};

/// Package duration on a simulated device: dispatch overhead, the input
/// slice transfer, compute at the device's throughput, and the output
/// slice transfer back.
inline double simulate_package_ms(const DeviceProfile& dev, const Package& pkg,
                                  const ValidatedProgram& prog, const CostFn& cost) {
  const std::uint64_t lws = prog.local_work_size();
  const std::uint64_t first = pkg.offset_wg * lws;
  const std::uint64_t count = pkg.size_wg * lws;

  double work = 0.0;
  for (std::uint64_t i = first; i < first + count; ++i) work += cost(i);

  double bytes_in = 0.0;
  const auto item_share = static_cast<double>(count) / static_cast<double>(prog.global_work_size());
  for (const auto& buf : prog.spec().in_buffers)
    bytes_in += static_cast<double>(buf.size_bytes()) * item_share;

  double bytes_out = 0.0;
  const OutRange range = out_range_for(pkg, prog);
  for (const auto& buf : prog.spec().out_buffers)
    bytes_out += static_cast<double>(range.count * buf.element_size_bytes);

  return dev.launch_overhead_ms + bytes_in / dev.bandwidth_bytes_per_ms +
         work / dev.computing_power + bytes_out / dev.bandwidth_bytes_per_ms;
}

struct CompletionEvent {
  double time_ms = 0.0;
  std::uint32_t device_index = 0;
  std::uint64_t seq = 0;
};

/// Pending completion events of the virtual clock; pops the minimum with
/// ties broken by (time, device index, seq).
class EventQueue {
 public:
  void push(const CompletionEvent& e) { heap_.push(e); }
  bool empty() const { return heap_.empty(); }

  CompletionEvent pop_next() {
    if (heap_.empty())
      throw Error(ErrorCode::EmptyQueueWithPendingWork, "no completion events while work is pending");
    CompletionEvent e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const CompletionEvent& a, const CompletionEvent& b) const {
      if (a.time_ms != b.time_ms) return a.time_ms > b.time_ms;
      if (a.device_index != b.device_index) return a.device_index > b.device_index;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<CompletionEvent, std::vector<CompletionEvent>, Later> heap_;
};

using TallySlot = std::atomic<std::uint32_t>;

/// Persistent compute threads of one NativePool device. A package's index
/// range is split contiguously across the workers; exceptions from the
/// kernel surface as KernelPanic.
class NativePool {
 public:
  explicit NativePool(std::uint32_t worker_count) : worker_count_(worker_count) {
    threads_.reserve(worker_count);
    for (std::uint32_t w = 0; w < worker_count; ++w)
      threads_.emplace_back([this, w] { worker_loop(w); });
  }

  NativePool(const NativePool&) = delete;
  NativePool& operator=(const NativePool&) = delete;

  ~NativePool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    job_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::uint32_t worker_count() const { return worker_count_; }

  /// Applies the kernel to every work-item index in the package's range.
  void execute_package(const Package& pkg, const ValidatedProgram& prog, const KernelFn& kernel,
                       std::span<const std::vector<std::byte>> inputs,
                       std::span<std::vector<std::byte>> outputs, TallySlot* tally = nullptr) {
    out_range_for(pkg, prog);  // divisibility check before any write
    const std::uint64_t lws = prog.local_work_size();
    {
      std::lock_guard lock(mutex_);
      job_ = Job{pkg.offset_wg * lws, pkg.size_wg * lws, &kernel, &prog, inputs, outputs, tally};
      pending_workers_ = worker_count_;
      first_error_ = nullptr;
      ++generation_;
    }
    job_cv_.notify_all();
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_workers_ == 0; });
    if (first_error_) std::rethrow_exception(first_error_);
  }

 private:
  struct Job {
    std::uint64_t first_item = 0;
    std::uint64_t item_count = 0;
    const KernelFn* kernel = nullptr;
    const ValidatedProgram* prog = nullptr;
    std::span<const std::vector<std::byte>> inputs;
    std::span<std::vector<std::byte>> outputs;
    TallySlot* tally = nullptr;
  };

  void worker_loop(std::uint32_t worker) {
    std::uint64_t seen_generation = 0;
    for (;;) {
      Job job;
      {
        std::unique_lock lock(mutex_);
        job_cv_.wait(lock, [&] { return stop_ || generation_ != seen_generation; });
        if (stop_) return;
        seen_generation = generation_;
        job = job_;
      }
      const std::uint64_t begin = job.first_item + job.item_count * worker / worker_count_;
      const std::uint64_t end = job.first_item + job.item_count * (worker + 1) / worker_count_;
      try {
        KernelBuffers io(job.inputs, job.outputs);
        const auto args = std::span<const ArgValue>(job.prog->spec().args);
        for (std::uint64_t i = begin; i < end; ++i) {
          (*job.kernel)(i, args, io);
          if (job.tally) job.tally[i].fetch_add(1, std::memory_order_relaxed);
        }
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!first_error_) {
          try {
            throw;
          } catch (const Error&) {
            first_error_ = std::current_exception();
          } catch (const std::exception& e) {
            first_error_ = std::make_exception_ptr(Error(ErrorCode::KernelPanic, e.what()));
          } catch (...) {
            first_error_ = std::make_exception_ptr(Error(ErrorCode::KernelPanic, "unknown kernel exception"));
          }
        }
      }
      {
        std::lock_guard lock(mutex_);
        if (--pending_workers_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::uint32_t worker_count_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable job_cv_;
  std::condition_variable done_cv_;
  Job job_;
  std::uint64_t generation_ = 0;
  std::uint32_t pending_workers_ = 0;
  bool stop_ = false;
  std::exception_ptr first_error_;
};

/// Runs one validated program across the configured devices: a coordinator
/// hands out scheduler packages on demand, one worker per device executes
/// them, and the trace of every completed package is assembled afterwards.
/// Safe to drive from one caller thread; not reentrant.
class Engine {
 public:
  Engine(EngineConfig cfg, ValidatedProgram prog)
      : cfg_(std::move(cfg)), prog_(std::move(prog)), epoch_(std::chrono::steady_clock::now()) {
    validate_config();
    for (const auto& dev : cfg_.devices) {
      pools_.push_back(dev.backend.kind == BackendKind::NativePool
                           ? std::make_unique<NativePool>(dev.backend.worker_count)
                           : nullptr);
    }
    init_ms_ = cfg_.clock_mode == ClockMode::Wall ? now_ms() : 0.0;
  }

  RunResult run(std::span<const std::vector<std::byte>> inputs) {
    return run(inputs, kernel_for(prog_), cost_model_for(prog_));
  }

  RunResult run(std::span<const std::vector<std::byte>> inputs, const KernelFn& kernel, const CostFn& cost) {
    check_inputs(inputs);
    std::vector<std::vector<std::byte>> outputs;
    for (const auto& buf : prog_.spec().out_buffers) outputs.emplace_back(buf.size_bytes());

    std::unique_ptr<TallySlot[]> tally;
    if (const char* env = std::getenv("COEXEC_TALLY"); env && env == std::string_view("1"))
      tally = std::make_unique<TallySlot[]>(prog_.global_work_size());

    auto scheduler = make_scheduler(cfg_.scheduler, prog_.total_work_groups(), cfg_.devices);
    std::vector<Package> completed = cfg_.clock_mode == ClockMode::Virtual
        ? drive_virtual(*scheduler, kernel, cost, inputs, outputs, tally.get())
        : drive_wall(*scheduler, kernel, inputs, outputs, tally.get());
    // canonical order: issue sequence, not completion
    std::sort(completed.begin(), completed.end(),
              [](const Package& a, const Package& b) { return a.seq < b.seq; });

    std::vector<Error> errors;
    if (!tiles_exactly(completed, prog_.total_work_groups()))
      errors.emplace_back(ErrorCode::SchedulerError, "packages do not tile the work-group range exactly once");
    if (tally) {
      for (std::uint64_t i = 0; i < prog_.global_work_size(); ++i) {
        if (tally[i].load(std::memory_order_relaxed) != 1) {
          errors.emplace_back(ErrorCode::TallyViolation,
                              "work-item " + std::to_string(i) + " executed " +
                                  std::to_string(tally[i].load()) + " times");
          break;
        }
      }
    }
    if (!errors.empty()) throw EngineFailure(std::move(errors));

    return RunResult{std::move(outputs), assemble_trace(std::move(completed))};
  }

  double init_ms() const { return init_ms_; }

 private:
  void validate_config() const {
    if (cfg_.devices.empty()) throw Error(ErrorCode::ConfigError, "engine needs at least one device");
    for (std::size_t i = 0; i < cfg_.devices.size(); ++i) {
      const auto& dev = cfg_.devices[i];
      validate_device(dev);
      for (std::size_t j = i + 1; j < cfg_.devices.size(); ++j)
        if (cfg_.devices[j].id == dev.id)
          throw Error(ErrorCode::ConfigError, "duplicate device id '" + dev.id + "'");
      const bool simulated = dev.backend.kind == BackendKind::Simulated;
      if (cfg_.clock_mode == ClockMode::Virtual && !simulated)
        throw Error(ErrorCode::ConfigError, "virtual clock mode requires simulated backends");
      if (cfg_.clock_mode == ClockMode::Wall && simulated)
        throw Error(ErrorCode::ConfigError, "wall clock mode requires native_pool backends");
    }
  }

  void check_inputs(std::span<const std::vector<std::byte>> inputs) const {
    const auto& bufs = prog_.spec().in_buffers;
    if (inputs.size() != bufs.size())
      throw Error(ErrorCode::InputSizeMismatch,
                  "expected " + std::to_string(bufs.size()) + " input buffers, got " +
                      std::to_string(inputs.size()));
    for (std::size_t i = 0; i < bufs.size(); ++i)
      if (inputs[i].size() != bufs[i].size_bytes())
        throw Error(ErrorCode::InputSizeMismatch,
                    "input '" + bufs[i].name + "' is " + std::to_string(inputs[i].size()) +
                        " bytes, descriptor says " + std::to_string(bufs[i].size_bytes()));
  }

  double now_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
  }

  Package make_package(std::uint64_t seq, std::uint32_t device, const PackageRange& range, double t) const {
    Package pkg;
    pkg.seq = seq;
    pkg.device_index = device;
    pkg.device_id = cfg_.devices[device].id;
    pkg.offset_wg = range.offset_wg;
    pkg.size_wg = range.size_wg;
    pkg.t_enqueue_ms = t;
    pkg.t_start_ms = t;
    return pkg;
  }

  std::vector<Package> drive_virtual(Scheduler& scheduler, const KernelFn& kernel, const CostFn& cost,
                                     std::span<const std::vector<std::byte>> inputs,
                                     std::span<std::vector<std::byte>> outputs, TallySlot* tally) {
    std::vector<Package> completed;
    EventQueue events;
    std::vector<Package> inflight(cfg_.devices.size());
    double clock = 0.0;
    std::uint64_t next_seq = 0;

    auto request = [&](std::uint32_t device) {
      const auto range = scheduler.next(device);
      if (!range) return;
      Package pkg = make_package(next_seq++, device, *range, clock);
      const double duration = simulate_package_ms(cfg_.devices[device], pkg, prog_, cost);
      events.push(CompletionEvent{clock + duration, device, pkg.seq});
      inflight[device] = std::move(pkg);
    };

    for (std::uint32_t d = 0; d < cfg_.devices.size(); ++d) request(d);
    while (!events.empty()) {
      const CompletionEvent event = events.pop_next();
      clock = event.time_ms;
      Package pkg = std::move(inflight[event.device_index]);
      pkg.t_end_ms = event.time_ms;
      execute_inline(pkg, kernel, inputs, outputs, tally);
      completed.push_back(std::move(pkg));
      request(event.device_index);
    }
    if (scheduler.remaining_work_groups() != 0)
      throw Error(ErrorCode::EmptyQueueWithPendingWork,
                  std::to_string(scheduler.remaining_work_groups()) + " work-groups were never dispatched");
    return completed;
  }

  void execute_inline(const Package& pkg, const KernelFn& kernel,
                      std::span<const std::vector<std::byte>> inputs,
                      std::span<std::vector<std::byte>> outputs, TallySlot* tally) {
    out_range_for(pkg, prog_);
    KernelBuffers io(inputs, outputs);
    const auto args = std::span<const ArgValue>(prog_.spec().args);
    const std::uint64_t first = pkg.offset_wg * prog_.local_work_size();
    const std::uint64_t count = pkg.size_wg * prog_.local_work_size();
    for (std::uint64_t i = first; i < first + count; ++i) {
      kernel(i, args, io);
      if (tally) tally[i].fetch_add(1, std::memory_order_relaxed);
    }
  }

  std::vector<Package> drive_wall(Scheduler& scheduler, const KernelFn& kernel,
                                  std::span<const std::vector<std::byte>> inputs,
                                  std::span<std::vector<std::byte>> outputs, TallySlot* tally) {
    std::mutex coordinator_mutex;  // serializes scheduler access and seq
    std::mutex completion_mutex;
    std::vector<Package> completed;
    std::vector<Error> errors;
    std::atomic<bool> abort{false};
    std::uint64_t next_seq = 0;

    auto worker = [&](std::uint32_t device) {
      while (!abort.load(std::memory_order_relaxed)) {
        std::optional<PackageRange> range;
        std::uint64_t seq = 0;
        double t_enqueue = 0.0;
        {
          std::lock_guard lock(coordinator_mutex);
          range = scheduler.next(device);
          if (range) {
            seq = next_seq++;
            t_enqueue = now_ms();
          }
        }
        if (!range) break;
        Package pkg = make_package(seq, device, *range, t_enqueue);
        pkg.t_start_ms = now_ms();
        // native pools share host memory; only the dispatch overhead applies
        const double overhead = cfg_.devices[device].launch_overhead_ms;
        if (overhead > 0.0)
          std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(overhead));
        try {
          pools_[device]->execute_package(pkg, prog_, kernel, inputs, outputs, tally);
        } catch (const Error& e) {
          std::lock_guard lock(completion_mutex);
          errors.push_back(e);
          abort.store(true, std::memory_order_relaxed);
          break;
        }
        pkg.t_end_ms = now_ms();
        std::lock_guard lock(completion_mutex);
        completed.push_back(std::move(pkg));
      }
    };

    std::vector<std::thread> device_threads;
    device_threads.reserve(cfg_.devices.size());
    for (std::uint32_t d = 0; d < cfg_.devices.size(); ++d) device_threads.emplace_back(worker, d);
    for (auto& t : device_threads) t.join();

    if (!errors.empty()) throw EngineFailure(std::move(errors));
    return completed;
  }

  ExecutionTrace assemble_trace(std::vector<Package> completed) const {
    ExecutionTrace trace;
    trace.program = summarize(prog_);
    trace.devices = cfg_.devices;
    trace.scheduler = describe(cfg_.scheduler);
    trace.clock_mode = cfg_.clock_mode;
    trace.seed = cfg_.seed;
    trace.init_ms = init_ms_;
    trace.init_in_total = !cfg_.exclude_init_from_total;

    double last_end = 0.0;
    std::map<std::string, std::pair<double, double>> spans;  // id -> (first enqueue, last end)
    for (const auto& pkg : completed) {
      last_end = std::max(last_end, pkg.t_end_ms);
      auto [it, inserted] = spans.try_emplace(pkg.device_id, pkg.t_enqueue_ms, pkg.t_end_ms);
      if (!inserted) {
        it->second.first = std::min(it->second.first, pkg.t_enqueue_ms);
        it->second.second = std::max(it->second.second, pkg.t_end_ms);
      }
    }
    for (const auto& [id, span] : spans) trace.per_device_time_ms[id] = span.second - span.first;
    trace.t_total_ms = cfg_.exclude_init_from_total ? last_end - init_ms_ : last_end;
    trace.packages = std::move(completed);
    return trace;
  }

  EngineConfig cfg_;
  ValidatedProgram prog_;
  std::chrono::steady_clock::time_point epoch_;
  double init_ms_ = 0.0;
  std::vector<std::unique_ptr<NativePool>> pools_;
};

inline RunResult run(const EngineConfig& cfg, const ValidatedProgram& prog,
                     std::span<const std::vector<std::byte>> inputs) {
  Engine engine(cfg, prog);
  return engine.run(inputs);
}

}  // namespace coexec
