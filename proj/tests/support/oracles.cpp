#include "oracles.hpp"

#include <boost/numeric/odeint.hpp>

#include <vector>

namespace mflq::testing {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

namespace {

Matrix unpack(const State& s, std::size_t offset, Eigen::Index r, Eigen::Index c) {
    Matrix a(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) a(i, j) = s[offset + static_cast<std::size_t>(j * r + i)];
    return a;
}

void pack(const Matrix& a, State& s, std::size_t offset) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) s[offset + static_cast<std::size_t>(j * a.rows() + i)] = a(i, j);
}

struct Raw {
    Matrix A, At, B, Bt, Q, Qt, S, St, R, Rt;
    std::vector<Matrix> C, Ct, D, Dt;
};

Raw raw_at(const ProblemSpec& s, double t) {
    const auto& c = s.coeffs;
    const auto& w = s.weights;
    Raw r{c.A(t), c.Atilde(t), c.B(t), c.Btilde(t), w.Q(t), w.Qtilde(t), w.S(t), w.Stilde(t), w.R(t), w.Rtilde(t),
          {}, {}, {}, {}};
    for (int j = 0; j < s.d(); ++j) {
        r.C.push_back(c.C[j](t));
        r.Ct.push_back(c.Ctilde[j](t));
        r.D.push_back(c.D[j](t));
        r.Dt.push_back(c.Dtilde[j](t));
    }
    return r;
}

template <typename System>
void integrate(System sys, State& x, double t0, double t1, double tol) {
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_adaptive(stepper, sys, x, t0, t1, (t1 - t0) * 1e-3);
}

}  // namespace

RiccatiReference reference_riccati(const ProblemSpec& spec, double tol) {
    const Eigen::Index n = spec.n();
    const auto nn = static_cast<std::size_t>(n * n);
    const double T = spec.T;
    // state in reversed time tau = T - t
    auto sys = [&](const State& x, State& dx, double tau) {
        const double t = T - tau;
        const Raw r = raw_at(spec, t);
        const Matrix P = unpack(x, 0, n, n);
        const Matrix Ph = unpack(x, nn, n, n);
        const Matrix Ah = r.A + r.At, Bh = r.B + r.Bt;
        Matrix N = r.R, L = P * r.B + r.S, F = P * r.A + r.A.transpose() * P + r.Q;
        Matrix Nh = r.R + r.Rt, Lh = Ph * Bh + r.S + r.St, Fh = Ph * Ah + Ah.transpose() * Ph + r.Q + r.Qt;
        for (std::size_t j = 0; j < r.C.size(); ++j) {
            const Matrix Ch = r.C[j] + r.Ct[j], Dh = r.D[j] + r.Dt[j];
            N += r.D[j].transpose() * P * r.D[j];
            L += r.C[j].transpose() * P * r.D[j];
            F += r.C[j].transpose() * P * r.C[j];
            Nh += Dh.transpose() * P * Dh;
            Lh += Ch.transpose() * P * Dh;
            Fh += Ch.transpose() * P * Ch;
        }
        const Matrix dP = F - L * N.inverse() * L.transpose();
        const Matrix dPh = Fh - Lh * Nh.inverse() * Lh.transpose();
        dx.assign(2 * nn, 0.0);
        pack(0.5 * (dP + dP.transpose()), dx, 0);
        pack(0.5 * (dPh + dPh.transpose()), dx, nn);
    };
    State x(2 * nn);
    const Matrix G = spec.weights.G.matrix();
    pack(G, x, 0);
    pack(G + spec.weights.Gtilde.matrix(), x, nn);
    integrate(sys, x, 0.0, T, tol);
    return {unpack(x, 0, n, n), unpack(x, nn, n, n)};
}

MomentReference reference_moments(const ProblemSpec& spec, const FeedbackLaw& law, double tol) {
    const Eigen::Index n = spec.n();
    const auto un = static_cast<std::size_t>(n);
    const auto nn = un * un;
    auto sys = [&](const State& x, State& dx, double t) {
        const Raw r = raw_at(spec, t);
        const Vector m = unpack(x, 0, n, 1);
        const Matrix V = unpack(x, un, n, n);
        const Matrix Th = law.Theta(t), Thh = law.ThetaHat(t);
        const Vector c = law.c(t);
        const Vector ub = Thh * m + c;
        const Matrix Ah = r.A + r.At, Bh = r.B + r.Bt;
        const Vector dm = Ah * m + Bh * ub;
        // X - EX has drift (A + B Theta)(X - EX) and channel-j diffusion (C_j + D_j Theta)(X - EX) + (Chat_j m + Dhat_j ubar)
        const Matrix Acl = r.A + r.B * Th;
        Matrix dV = Acl * V + V * Acl.transpose();
        for (std::size_t j = 0; j < r.C.size(); ++j) {
            const Matrix M = r.C[j] + r.D[j] * Th;
            const Vector v = (r.C[j] + r.Ct[j]) * m + (r.D[j] + r.Dt[j]) * ub;
            dV += M * V * M.transpose() + v * v.transpose();
        }
        // E[<QX,X> + 2<Su,X> + <Ru,u>] + mean terms
        const Matrix W = r.Q + r.S * Th + Th.transpose() * r.S.transpose() + Th.transpose() * r.R * Th;
        const Matrix Qh = r.Q + r.Qt, Sh = r.S + r.St, Rh = r.R + r.Rt;
        const double run = (W.cwiseProduct(V)).sum() + m.dot(Qh * m) + 2.0 * m.dot(Sh * ub) + ub.dot(Rh * ub);
        dx.assign(x.size(), 0.0);
        pack(dm, dx, 0);
        pack(0.5 * (dV + dV.transpose()), dx, un);
        dx[un + nn] = run;
    };
    State x(un + nn + 1, 0.0);
    pack(spec.x0, x, 0);
    integrate(sys, x, 0.0, spec.T, tol);
    MomentReference out;
    out.mT = unpack(x, 0, n, 1);
    out.VT = unpack(x, un, n, n);
    const Matrix G = spec.weights.G.matrix(), Gh = G + spec.weights.Gtilde.matrix();
    out.cost = x[un + nn] + G.cwiseProduct(out.VT).sum() + out.mT.dot(Gh * out.mT);
    if (spec.weights.ell) out.cost += 2.0 * spec.weights.ell->dot(out.mT);
    return out;
}

}  // namespace mflq::testing
