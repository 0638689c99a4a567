#include "hmfg/time_function.hpp"

#include <cmath>

namespace hmfg {

double ExpTrigTerm::operator()(double t) const {
    double v = coef;
    if (rate != 0.0) v *= std::exp(rate * t);
    switch (trig) {
        case Trig::cos: v *= std::cos(freq * t); break;
        case Trig::sin: v *= std::sin(freq * t); break;
        case Trig::none: break;
    }
    return v;
}

TimeFunction TimeFunction::constant(double c) {
    TimeFunction f;
    if (c != 0.0) f.terms.push_back({c, 0.0, ExpTrigTerm::Trig::none, 0.0});
    return f;
}

double TimeFunction::operator()(double t) const {
    double s = 0.0;
    for (const auto& term : terms) s += term(t);
    return s;
}

bool TimeFunction::is_constant() const {
    for (const auto& term : terms)
        if (term.rate != 0.0 || (term.trig != ExpTrigTerm::Trig::none && term.freq != 0.0))
            return false;
    return true;
}

TimeMatrix::TimeMatrix(const Mat& constant)
    : rows_(constant.rows()), cols_(constant.cols()), entries_(rows_ * cols_) {
    for (Eigen::Index i = 0; i < rows_; ++i)
        for (Eigen::Index j = 0; j < cols_; ++j) at(i, j) = TimeFunction::constant(constant(i, j));
}

TimeMatrix::TimeMatrix(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows), cols_(cols), entries_(rows * cols) {}

bool TimeMatrix::is_constant() const {
    for (const auto& e : entries_)
        if (!e.is_constant()) return false;
    return true;
}

Mat TimeMatrix::operator()(double t) const {
    Mat out(rows_, cols_);
    eval_into(t, out);
    return out;
}

void TimeMatrix::eval_into(double t, Eigen::Ref<Mat> out) const {
    for (Eigen::Index i = 0; i < rows_; ++i)
        for (Eigen::Index j = 0; j < cols_; ++j) out(i, j) = at(i, j)(t);
}

}  // namespace hmfg
