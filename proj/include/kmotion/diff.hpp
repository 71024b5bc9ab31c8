// Copyright 2026 The kmotion Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every operation whose result depends on a tape input as a
// node holding its parents and the local partial derivatives. Values are
// computed eagerly, with exactly the same floating-point operations as the
// corresponding plain-double overloads below, so templated code evaluated
// with T = double and T = Var produces bit-identical values.
//
// The tape used by free operators is the thread's active tape, installed with
// TapeScope. A Var whose id is negative is a constant and records nothing.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "kmotion/errors.hpp"

namespace kmotion::diff {

enum class Op : std::uint8_t {
  Input,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sqrt,
  Sin,
  Cos,
  Square,
  Sum,
  Dot,
  Sample,
  Custom,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Dot: return "dot";
    case Op::Sample: return "sample";
    case Op::Custom: return "custom";
  }
  return "?";
}

class Tape;

namespace detail {
inline thread_local Tape* active_tape = nullptr;
// Fault injection for mutation testing: partials of this op kind are negated.
inline std::atomic<int> flipped_op{-1};
}  // namespace detail

class Var {
 public:
  Var() = default;
  // Implicit so that literals mix freely with Vars in templated code.
  Var(double constant) : value_(constant) {  // NOLINT
    if (!std::isfinite(constant)) {
      throw EvaluationError("non-finite constant", -1);
    }
  }

  double value() const noexcept { return value_; }
  std::int32_t id() const noexcept { return id_; }
  bool is_constant() const noexcept { return id_ < 0; }

 private:
  friend class Tape;
  Var(double v, std::int32_t id) : value_(v), id_(id) {}

  double value_ = 0.0;
  std::int32_t id_ = -1;
};

class Tape {
 public:
  Tape() { edge_end_.push_back(0); }

  static Tape* active() noexcept { return detail::active_tape; }

  Var input(double v) {
    if (!std::isfinite(v)) {
      throw EvaluationError("non-finite input at node " +
                                std::to_string(size()),
                            static_cast<long>(size()));
    }
    ops_.push_back(Op::Input);
    edge_end_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return Var(v, static_cast<std::int32_t>(ops_.size() - 1));
  }

  /// Records a node with an already computed value. Constant parents are
  /// dropped; a node with no live parent collapses to a constant.
  Var record(Op op, double value, std::span<const Var> parents,
             std::span<const double> partials) {
    const std::size_t first = parents_.size();
    const bool flip = static_cast<int>(op) == detail::flipped_op.load(
                                                  std::memory_order_relaxed);
    for (std::size_t k = 0; k < parents.size(); ++k) {
      if (parents[k].is_constant()) continue;
      parents_.push_back(parents[k].id());
      partials_.push_back(flip ? -partials[k] : partials[k]);
    }
    const std::size_t node = ops_.size();
    if (!std::isfinite(value)) {
      parents_.resize(first);
      partials_.resize(first);
      throw EvaluationError(std::string("non-finite value at node ") +
                                std::to_string(node) + " (" + op_name(op) + ")",
                            static_cast<long>(node));
    }
    if (parents_.size() == first) return Var(value);
    for (std::size_t e = first; e < partials_.size(); ++e) {
      if (!std::isfinite(partials_[e])) {
        parents_.resize(first);
        partials_.resize(first);
        throw EvaluationError(std::string("non-finite derivative at node ") +
                                  std::to_string(node) + " (" + op_name(op) +
                                  ")",
                              static_cast<long>(node));
      }
    }
    ops_.push_back(op);
    edge_end_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return Var(value, static_cast<std::int32_t>(node));
  }

  template <std::size_t N>
  Var record(Op op, double value, const std::array<Var, N>& parents,
             const std::array<double, N>& partials) {
    return record(op, value, std::span<const Var>(parents),
                  std::span<const double>(partials));
  }

  std::size_t size() const noexcept { return ops_.size(); }
  std::size_t edge_count() const noexcept { return parents_.size(); }
  Op op(std::size_t node) const { return ops_.at(node); }
  std::span<const std::int32_t> parents(std::size_t node) const {
    return {parents_.data() + edge_end_.at(node),
            parents_.data() + edge_end_.at(node + 1)};
  }
  std::span<const double> partials(std::size_t node) const {
    return {partials_.data() + edge_end_.at(node),
            partials_.data() + edge_end_.at(node + 1)};
  }

  /// Drops all nodes but keeps the allocations for the next recording.
  void clear() {
    ops_.clear();
    parents_.clear();
    partials_.clear();
    edge_end_.assign(1, 0);
  }

  /// Reverse sweep from `output`; returns the adjoint of every node.
  std::vector<double> adjoints(Var output, double seed = 1.0) const {
    if (!std::isfinite(seed)) throw EvaluationError("non-finite seed", -1);
    std::vector<double> adj(ops_.size(), 0.0);
    if (output.is_constant()) return adj;
    if (static_cast<std::size_t>(output.id()) >= ops_.size()) {
      throw ContractError("output does not belong to this tape");
    }
    adj[output.id()] = seed;
    for (std::size_t i = static_cast<std::size_t>(output.id()) + 1; i-- > 0;) {
      const double a = adj[i];
      if (a == 0.0) continue;
      for (std::uint32_t e = edge_end_[i]; e < edge_end_[i + 1]; ++e) {
        adj[parents_[e]] += a * partials_[e];
      }
    }
    for (std::size_t i = 0; i < adj.size(); ++i) {
      if (!std::isfinite(adj[i])) {
        throw EvaluationError("gradient overflow at node " + std::to_string(i),
                              static_cast<long>(i));
      }
    }
    return adj;
  }

 private:
  std::vector<Op> ops_;
  std::vector<std::uint32_t> edge_end_;
  std::vector<std::int32_t> parents_;
  std::vector<double> partials_;
};

/// Installs a tape as the thread's active tape for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(detail::active_tape) {
    detail::active_tape = &tape;
  }
  ~TapeScope() { detail::active_tape = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

namespace testing {
/// Negates every recorded partial of one op kind while alive.
class ScopedSignFlip {
 public:
  explicit ScopedSignFlip(Op op) { detail::flipped_op = static_cast<int>(op); }
  ~ScopedSignFlip() { detail::flipped_op = -1; }
  ScopedSignFlip(const ScopedSignFlip&) = delete;
  ScopedSignFlip& operator=(const ScopedSignFlip&) = delete;
};
}  // namespace testing

namespace detail {

inline Tape& tape_or_throw() {
  Tape* t = Tape::active();
  if (t == nullptr) throw ContractError("no active tape for a live Var");
  return *t;
}

inline Var unary(Op op, double value, const Var& x, double partial) {
  if (x.is_constant()) return Var(value);
  return tape_or_throw().record<1>(op, value, {x}, {partial});
}

inline Var binary(Op op, double value, const Var& a, double da, const Var& b,
                  double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  return tape_or_throw().record<2>(op, value, {a, b}, {da, db});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(Op::Add, a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(Op::Sub, a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(Op::Mul, a.value() * b.value(), a, b.value(), b,
                        a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return detail::binary(Op::Div, q, a, 1.0 / b.value(), b, -q / b.value());
}
inline Var operator-(const Var& a) {
  return detail::unary(Op::Neg, -a.value(), a, -1.0);
}
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

// ---------------------------------------------------------------------------
// Elementary functions, with plain-double twins so templated code can call
// diff::f(x) for either scalar type.

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double square(double x) { return x * x; }
inline double abs(double x) { return x >= 0.0 ? x : -x; }
inline double min(double a, double b) { return a <= b ? a : b; }
inline double max(double a, double b) { return a >= b ? a : b; }

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return detail::unary(Op::Exp, e, x, e);
}
inline Var log(const Var& x) {
  return detail::unary(Op::Log, std::log(x.value()), x, 1.0 / x.value());
}
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return detail::unary(Op::Sqrt, s, x, 0.5 / s);
}
inline Var sin(const Var& x) {
  return detail::unary(Op::Sin, std::sin(x.value()), x, std::cos(x.value()));
}
inline Var cos(const Var& x) {
  return detail::unary(Op::Cos, std::cos(x.value()), x, -std::sin(x.value()));
}
inline Var square(const Var& x) {
  return detail::unary(Op::Square, x.value() * x.value(), x, 2.0 * x.value());
}
// Kinks take the derivative of the selected branch; ties go to the first
// operand (and to +x for abs).
inline Var abs(const Var& x) { return x.value() >= 0.0 ? x : -x; }
inline Var min(const Var& a, const Var& b) { return a.value() <= b.value() ? a : b; }
inline Var max(const Var& a, const Var& b) { return a.value() >= b.value() ? a : b; }

/// Left-to-right sum; a single node for Vars.
template <class T>
T sum(std::span<const T> xs) {
  if constexpr (std::is_same_v<T, double>) {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc = (i == 0) ? xs[0] : acc + xs[i];
    return acc;
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      acc = (i == 0) ? xs[0].value() : acc + xs[i].value();
    }
    bool live = false;
    for (const Var& x : xs) live = live || !x.is_constant();
    if (!live) return Var(acc);
    thread_local std::vector<double> ones;
    ones.assign(xs.size(), 1.0);
    return detail::tape_or_throw().record(Op::Sum, acc, xs, ones);
  }
}

/// Left-to-right inner product; a single node for Vars.
template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ContractError("dot: length mismatch");
  if constexpr (std::is_same_v<T, double>) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      acc = (i == 0) ? a[0] * b[0] : acc + a[i] * b[i];
    }
    return acc;
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double p = a[i].value() * b[i].value();
      acc = (i == 0) ? p : acc + p;
    }
    thread_local std::vector<Var> parents;
    thread_local std::vector<double> partials;
    parents.clear();
    partials.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      parents.push_back(a[i]);
      partials.push_back(b[i].value());
      parents.push_back(b[i]);
      partials.push_back(a[i].value());
    }
    bool live = false;
    for (const Var& x : parents) live = live || !x.is_constant();
    if (!live) return Var(acc);
    return detail::tape_or_throw().record(Op::Dot, acc, parents, partials);
  }
}

/// sum_i w[i] * xs[i] with constant weights; a single node for Vars.
template <class T>
T weighted_sum(std::span<const T> xs, std::span<const double> w) {
  if (xs.size() != w.size()) throw ContractError("weighted_sum: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = value_of(xs[i]) * w[i];
    acc = (i == 0) ? p : acc + p;
  }
  if constexpr (std::is_same_v<T, double>) {
    return acc;
  } else {
    bool live = false;
    for (const Var& x : xs) live = live || !x.is_constant();
    if (!live) return Var(acc);
    return detail::tape_or_throw().record(Op::Dot, acc, xs, w);
  }
}

template <class T, std::size_t N>
T dot(const std::array<T, N>& a, const std::array<T, N>& b) {
  return dot<T>(std::span<const T>(a), std::span<const T>(b));
}

// ---------------------------------------------------------------------------
// Whole-program interface: record, differentiate, verify.

/// A finished recording of one scalar program.
struct Recording {
  double value = 0.0;
  Tape tape;
  std::vector<Var> inputs;
  Var output;
};

/// Evaluates `expr(std::span<const Var>)` on a fresh tape.
template <class F>
Recording forward(F&& expr, std::span<const double> inputs) {
  Recording rec;
  {
    TapeScope scope(rec.tape);
    rec.inputs.reserve(inputs.size());
    for (double x : inputs) rec.inputs.push_back(rec.tape.input(x));
    rec.output = expr(std::span<const Var>(rec.inputs));
  }
  rec.value = rec.output.value();
  return rec;
}

/// Gradient of the recorded output with respect to each input.
inline std::vector<double> backward(const Recording& rec, double seed = 1.0) {
  const std::vector<double> adj = rec.tape.adjoints(rec.output, seed);
  std::vector<double> grad(rec.inputs.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = adj[rec.inputs[i].id()];
  return grad;
}

struct GradReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares backward() against central differences (f(x+h) - f(x-h)) / 2h.
///
/// Relative error per coordinate is |a - n| / max(|a|, |n|, abs_floor); the
/// floor keeps coordinates whose true derivative is ~0 from dominating.
/// `coordinates` restricts the check (empty = all inputs).
template <class F>
GradReport grad_check(F&& expr, std::span<const double> inputs, double step,
                      std::span<const std::size_t> coordinates = {},
                      double abs_floor = 1e-7) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");
  const Recording rec = forward(expr, inputs);
  const std::vector<double> analytic = backward(rec);

  std::vector<std::size_t> coords(coordinates.begin(), coordinates.end());
  if (coords.empty()) {
    for (std::size_t i = 0; i < inputs.size(); ++i) coords.push_back(i);
  }
  std::vector<double> x(inputs.begin(), inputs.end());
  GradReport report;
  bool first = true;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = expr(std::span<const double>(x));
    x[i] = saved - step;
    const double fm = expr(std::span<const double>(x));
    x[i] = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), abs_floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (first || err > report.max_relative_error) {
      report = {err, i, analytic[i], numeric};
      first = false;
    }
  }
  return report;
}

}  // namespace kmotion::diff
