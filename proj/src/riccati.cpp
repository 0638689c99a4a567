#include "hmfg/riccati.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hmfg {

LqSystem::LqSystem(std::function<void(double, Mat&)> a, Mat b, Mat q, Mat r)
    : A(std::move(a)), B(std::move(b)), Q(std::move(q)), R(std::move(r)) {
    const int d = int(Q.rows());
    if (Q.cols() != d) throw DimensionError("LqSystem: Q not square");
    if (B.rows() != d) throw DimensionError("LqSystem: B rows != state dimension");
    if (R.rows() != B.cols() || R.cols() != B.cols())
        throw DimensionError("LqSystem: R does not match input width");
    if (B.cols() > 0) {
        RinvBt = R.llt().solve(B.transpose());
        S = B * RinvBt;
        S = symmetrized(S);
    } else {
        RinvBt = Mat::Zero(0, d);
        S = Mat::Zero(d, d);
    }
}

LqSystem LqSystem::constant(const Mat& a, Mat b, Mat q, Mat r) {
    return LqSystem([a](double, Mat& out) { out = a; }, std::move(b), std::move(q), std::move(r));
}

Mat LqSystem::A_at(double t) const {
    Mat out(dim(), dim());
    A(t, out);
    return out;
}

namespace {

struct RhsWork {
    Mat A, PA, SP;
    explicit RhsWork(int d) : A(d, d), PA(d, d), SP(d, d) {}
};

void rhs_into(const LqSystem& sys, double t, const Mat& Pi, Mat& out, RhsWork& w) {
    sys.A(t, w.A);
    w.PA.noalias() = Pi * w.A;
    out = sys.Q;
    out += w.PA;
    out += w.PA.transpose();
    w.SP.noalias() = sys.S * Pi;
    out.noalias() -= Pi * w.SP;
}

double min_eig(const Mat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace

Mat riccati_rhs(const LqSystem& sys, double t, const Mat& Pi) {
    require_dims(Pi, sys.dim(), sys.dim(), "riccati_rhs: Pi");
    Mat out(sys.dim(), sys.dim());
    RhsWork w(sys.dim());
    rhs_into(sys, t, Pi, out, w);
    return symmetrized(out);
}

bool RiccatiSegment::contains(double t) const {
    const double eps = 1e-9 * std::max(1.0, std::abs(t1()));
    return t >= t0 - eps && t <= t1() + eps;
}

Mat RiccatiSegment::at(double t) const {
    if (!contains(t)) throw Error("Riccati segment queried outside [" + std::to_string(t0) + ", " +
                                  std::to_string(t1()) + "] at t=" + std::to_string(t));
    const int N = nodes() - 1;
    if (N == 0) return Pi[0];
    double x = (t - t0) / h;
    int i = int(std::floor(x));
    i = std::clamp(i, 0, N - 1);
    const double s = std::clamp(x - i, 0.0, 1.0);
    if (s == 0.0) return Pi[i];
    if (s == 1.0) return Pi[i + 1];
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    Mat out = h00 * Pi[i] + h01 * Pi[i + 1];
    out += (h10 * h) * dPi[i] + (h11 * h) * dPi[i + 1];
    return out;
}

Mat RiccatiSegment::gain(double t) const {
    if (!contains(t)) throw Error("feedback gain queried outside the segment at t=" + std::to_string(t));
    const int N = nodes() - 1;
    if (N == 0) return -RinvBt * Pi[0];
    double x = (t - t0) / h;
    int i = std::clamp(int(std::floor(x)), 0, N - 1);
    const double s = std::clamp(x - i, 0.0, 1.0);
    return -RinvBt * ((1.0 - s) * Pi[i] + s * Pi[i + 1]);
}

RiccatiSegment integrate_riccati(const LqSystem& sys, double t_end, const Mat& Pi_end,
                                 double t_start, double h, const IntegrateOptions& opt) {
    const int d = sys.dim();
    require_dims(Pi_end, d, d, "integrate_riccati: terminal value");
    if (!(t_start <= t_end)) throw Error("integrate_riccati: t_start > t_end");
    if (!(h > 0)) throw Error("integrate_riccati: step must be positive");
    const double span = t_end - t_start;
    int N = int(std::lround(span / h));
    if (N == 0 && span > 1e-12) N = 1;
    const double hh = N > 0 ? span / N : h;

    RiccatiSegment seg;
    seg.t0 = t_start;
    seg.h = hh;
    seg.RinvBt = sys.RinvBt;
    seg.Pi.assign(N + 1, Mat());
    seg.dPi.assign(N + 1, Mat());

    RhsWork w(d);
    Mat P = symmetrized(Pi_end), k1(d, d), k2(d, d), k3(d, d), k4(d, d), stage(d, d);
    auto node_time = [&](int i) { return i == N ? t_end : t_start + i * hh; };

    // the sign guarantee only holds for a semidefinite boundary value
    const bool check_psd = opt.check_psd && min_eig(P) >= -opt.psd_tol * std::max(1.0, P.norm());
    rhs_into(sys, t_end, P, k1, w);
    seg.Pi[N] = P;
    seg.dPi[N] = -symmetrized(k1);
    for (int i = N; i > 0; --i) {
        const double tm = t_start + (i - 0.5) * hh, tn = node_time(i - 1);
        // k1 already holds the right-hand side at (t, P)
        stage = P + (0.5 * hh) * k1;
        rhs_into(sys, tm, stage, k2, w);
        stage = P + (0.5 * hh) * k2;
        rhs_into(sys, tm, stage, k3, w);
        stage = P + hh * k3;
        rhs_into(sys, tn, stage, k4, w);
        P += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        P = symmetrized(P);
        const double nrm = P.norm();
        if (!std::isfinite(nrm) || nrm > opt.blowup)
            throw FiniteEscapeError("Riccati finite escape" +
                                    (opt.label.empty() ? std::string() : " in " + opt.label) +
                                    " at t=" + std::to_string(tn));
        if (check_psd && (i % 16 == 1 || i == 1) &&
            min_eig(P) < -opt.psd_tol * std::max(1.0, nrm))
            throw SolverError("Riccati solution lost positive semidefiniteness" +
                              (opt.label.empty() ? std::string() : " in " + opt.label) +
                              " at t=" + std::to_string(tn));
        rhs_into(sys, tn, P, k1, w);
        seg.Pi[i - 1] = P;
        seg.dPi[i - 1] = -symmetrized(k1);
    }
    return seg;
}

Mat apply_jump_condition(const Mat& Pi_after, const Mat& Psi, const Mat& C) {
    if (Pi_after.rows() != Psi.rows() || Pi_after.cols() != Psi.rows())
        throw DimensionError("jump condition: Pi_after is " + std::to_string(Pi_after.rows()) + "x" +
                             std::to_string(Pi_after.cols()) + ", map has " +
                             std::to_string(Psi.rows()) + " rows");
    if (C.rows() != Psi.cols() || C.cols() != Psi.cols())
        throw DimensionError("jump condition: switching cost does not match source dimension");
    Mat out = Psi.transpose() * Pi_after * Psi + C;
    return symmetrized(out);
}

Mat apply_jump_condition(const Mat& Pi_after, const JumpTransition& edge, int agent) {
    return apply_jump_condition(Pi_after, edge.psi(agent), edge.cost(agent));
}

std::pair<double, double> GapFunction::eig_range(double s) const {
    const Mat H = (*this)(s);
    if (H.size() == 0) return {0.0, 0.0};
    Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(H.rows() - 1)};
}

GapFunction switch_gap(const LqSystem& before, const LqSystem& after,
                       std::function<Mat(double)> Pi_after, Mat Psi,
                       std::function<Mat(double)> C, std::function<Mat(double)> dC) {
    if (Psi.rows() != after.dim() || Psi.cols() != before.dim())
        throw DimensionError("switch_gap: jump map does not match the two systems");
    return {[=](double s) {
        const Mat P = Pi_after(s);
        Mat H = riccati_rhs(before, s, apply_jump_condition(P, Psi, C(s)));
        if (Psi.rows() > 0) H -= Psi.transpose() * riccati_rhs(after, s, P) * Psi;
        if (dC) H += dC(s);
        return H;
    }};
}

GapFunction switch_gap(const LqSystem& before, const LqSystem& after,
                       std::function<Mat(double)> Pi_after, const Mat& Psi, const Mat& C) {
    return switch_gap(before, after, std::move(Pi_after), Psi, [C](double) { return C; });
}

GapFunction stopping_gap(const LqSystem& before, std::function<Mat(double)> C,
                         std::function<Mat(double)> dC) {
    return {[=](double s) {
        Mat H = riccati_rhs(before, s, C(s));
        if (dC) H += dC(s);
        return H;
    }};
}

namespace {

enum class Sign { neg, pos, zero, indefinite };

Sign classify(std::pair<double, double> ev, double tol) {
    const auto [lo, hi] = ev;
    if (lo >= -tol && hi <= tol) return Sign::zero;
    if (lo >= -tol) return Sign::pos;
    if (hi <= tol) return Sign::neg;
    return Sign::indefinite;
}

}  // namespace

EventSearch find_event_time(const GapFunction& gap, double t_lo, double t_hi, const EventOptions& opt) {
    EventSearch out;
    if (!(t_lo <= t_hi)) throw Error("find_event_time: empty window");
    std::vector<double> ts;
    const int K = int(std::floor((t_hi - t_lo) / opt.h + 1e-9));
    for (int i = 0; i <= K; ++i) ts.push_back(t_lo + i * opt.h);
    if (t_hi - ts.back() > 1e-9 * opt.h) ts.push_back(t_hi);

    std::vector<std::pair<double, double>> ev(ts.size());
    std::vector<Sign> cls(ts.size());
    bool all_zero = true, any_neg = false, any_indef = false;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        ev[i] = gap.eig_range(ts[i]);
        cls[i] = classify(ev[i], opt.tol_def);
        all_zero &= cls[i] == Sign::zero;
        any_neg |= cls[i] == Sign::neg;
        any_indef |= cls[i] == Sign::indefinite;
    }
    if (all_zero) {
        out.identically_zero = true;
        out.reason = "gap identically zero";
        return out;
    }

    auto bisect = [&](double lo, double hi, bool by_class) {
        while (hi - lo > opt.tol_root) {
            const double mid = 0.5 * (lo + hi);
            const auto e = gap.eig_range(mid);
            const Sign c = classify(e, opt.tol_def);
            if (by_class && c == Sign::neg) lo = mid;
            else if (by_class && c == Sign::pos) hi = mid;
            else if (by_class && c == Sign::zero) return mid;
            else if (e.first + e.second < 0) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    std::vector<double> strict;
    int prev = -1;
    for (int i = 0; i < int(ts.size()); ++i) {
        if (cls[i] == Sign::zero) continue;
        if (prev >= 0 && cls[prev] == Sign::neg && cls[i] == Sign::pos) {
            double t = i == prev + 1 ? bisect(ts[prev], ts[i], true) : 0.5 * (ts[prev + 1] + ts[i - 1]);
            const auto after = gap.eig_range(std::min(t + opt.h, t_hi));
            const auto before = gap.eig_range(std::max(t - opt.h, t_lo));
            if (after.first > -opt.tol_def && before.second < opt.tol_def) strict.push_back(t);
        }
        prev = i;
    }
    if (strict.size() > 1) {
        std::ostringstream os;
        os << "several switching instants:";
        for (double t : strict) os << ' ' << t;
        throw AmbiguityError(os.str(), strict);
    }
    if (strict.size() == 1) {
        out.time = strict.front();
        out.reason = "definite crossing";
        return out;
    }

    if (opt.allow_fallback && any_indef) {
        std::vector<double> cands;
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            const double f0 = ev[i].first + ev[i].second, f1 = ev[i + 1].first + ev[i + 1].second;
            if (f0 < -opt.tol_def && f1 > opt.tol_def) cands.push_back(bisect(ts[i], ts[i + 1], false));
        }
        if (cands.size() == 1) {
            out.time = cands.front();
            out.fallback = true;
            out.reason = "indefinite crossing (fallback)";
            return out;
        }
        if (cands.size() > 1) {
            out.candidates = cands;
            out.reason = "several indefinite crossings";
            return out;
        }
    }
    if (!any_neg && !any_indef) out.reason = "positive throughout window (boundary case)";
    else if (any_indef) out.reason = "indefinite, no definite crossing";
    else out.reason = "no crossing from negative to positive";
    return out;
}

Mat feedback_gain(const RiccatiSegment& sol, double t) { return sol.gain(t); }

void write_riccati_csv(const RiccatiSegment& sol, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    const int d = sol.dim();
    f << "t";
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) f << ",p_" << i + 1 << '_' << j + 1;
    f << '\n';
    char buf[32];
    for (int k = 0; k < sol.nodes(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10g", sol.t0 + k * sol.h);
        f << buf;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", sol.Pi[k](i, j));
                f << ',' << buf;
            }
        f << '\n';
    }
}

}  // namespace hmfg
