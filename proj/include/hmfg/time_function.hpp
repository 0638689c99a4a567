#pragma once

#include "hmfg/types.hpp"

#include <vector>

namespace hmfg {

// coef * exp(rate*t) * trig(freq*t); trig is 1, cos or sin.
struct ExpTrigTerm {
    enum class Trig { none, cos, sin };
    double coef = 0.0;
    double rate = 0.0;
    Trig trig = Trig::none;
    double freq = 0.0;

    double operator()(double t) const;
    bool operator==(const ExpTrigTerm&) const = default;
};

// Sum of ExpTrigTerms. An empty sum is the constant 0.
struct TimeFunction {
    std::vector<ExpTrigTerm> terms;

    static TimeFunction constant(double c);
    double operator()(double t) const;
    bool is_constant() const;
    bool operator==(const TimeFunction&) const = default;
};

// Matrix whose entries are TimeFunctions; constant matrices store one term per entry.
class TimeMatrix {
public:
    TimeMatrix() = default;
    TimeMatrix(const Mat& constant);
    TimeMatrix(Eigen::Index rows, Eigen::Index cols);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    TimeFunction& at(Eigen::Index i, Eigen::Index j) { return entries_[i * cols_ + j]; }
    const TimeFunction& at(Eigen::Index i, Eigen::Index j) const { return entries_[i * cols_ + j]; }

    bool is_constant() const;
    Mat operator()(double t) const;
    void eval_into(double t, Eigen::Ref<Mat> out) const;

    bool operator==(const TimeMatrix&) const = default;

private:
    Eigen::Index rows_ = 0, cols_ = 0;
    std::vector<TimeFunction> entries_;
};

}  // namespace hmfg
