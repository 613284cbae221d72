#include "pigi/predictor.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "pigi/geometry.h"

namespace pigi {

namespace {

constexpr double kLnEps = 1e-5;
constexpr uint16_t kModelVersion = 1;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// BCE from the logit; stable for large |z|.
double bce_from_logit(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::fabs(z)));
}

void matvec(const double* w, const double* x, double* y, int out, int in) {
  for (int o = 0; o < out; ++o) {
    double s = 0;
    const double* row = w + static_cast<long>(o) * in;
    for (int i = 0; i < in; ++i) s += row[i] * x[i];
    y[o] = s;
  }
}

void matvec_t_add(const double* w, const double* dy, double* dx, int out,
                  int in) {
  for (int o = 0; o < out; ++o) {
    const double* row = w + static_cast<long>(o) * in;
    for (int i = 0; i < in; ++i) dx[i] += row[i] * dy[o];
  }
}

void outer_add(double* dw, const double* dy, const double* x, int out,
               int in) {
  for (int o = 0; o < out; ++o) {
    double* row = dw + static_cast<long>(o) * in;
    for (int i = 0; i < in; ++i) row[i] += dy[o] * x[i];
  }
}

void ln_forward(const double* x, const double* g, const double* b, double* y,
                int d, double& mean, double& rstd) {
  double m = 0;
  for (int i = 0; i < d; ++i) m += x[i];
  m /= d;
  double v = 0;
  for (int i = 0; i < d; ++i) v += (x[i] - m) * (x[i] - m);
  v /= d;
  double r = 1.0 / std::sqrt(v + kLnEps);
  for (int i = 0; i < d; ++i) y[i] = g[i] * ((x[i] - m) * r) + b[i];
  mean = m;
  rstd = r;
}

void ln_backward(const double* x, const double* g, double mean, double rstd,
                 const double* dy, double* dx_add, double* dg_add,
                 double* db_add, int d) {
  double s1 = 0, s2 = 0;
  for (int i = 0; i < d; ++i) {
    double xh = (x[i] - mean) * rstd;
    double dxh = dy[i] * g[i];
    dg_add[i] += dy[i] * xh;
    db_add[i] += dy[i];
    s1 += dxh;
    s2 += dxh * xh;
  }
  for (int i = 0; i < d; ++i) {
    double xh = (x[i] - mean) * rstd;
    double dxh = dy[i] * g[i];
    dx_add[i] += rstd * (dxh - s1 / d - xh * s2 / d);
  }
}

struct LayerOff {
  long ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
  long ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
};

struct Off {
  long name_table, obj_w, obj_b, val_w, val_b, pe_init, pe_goal;
  std::vector<LayerOff> layers;
  long ln_f_g, ln_f_b, out_w, out_b;
};

Off offsets(const Model& m) {
  Off o;
  auto at = [&m](const std::string& n) {
    int b = m.block_index(n);
    if (b < 0) throw std::logic_error("missing parameter block " + n);
    return m.blocks[b].offset;
  };
  o.name_table = at("name_table");
  o.obj_w = at("obj_w");
  o.obj_b = at("obj_b");
  o.val_w = at("val_w");
  o.val_b = at("val_b");
  o.pe_init = at("pe_init");
  o.pe_goal = at("pe_goal");
  for (int l = 0; l < m.cfg.layers; ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    LayerOff lo;
    lo.ln1_g = at(pre + "ln1_g");
    lo.ln1_b = at(pre + "ln1_b");
    lo.wq = at(pre + "wq");
    lo.bq = at(pre + "bq");
    lo.wk = at(pre + "wk");
    lo.bk = at(pre + "bk");
    lo.wv = at(pre + "wv");
    lo.bv = at(pre + "bv");
    lo.wo = at(pre + "wo");
    lo.bo = at(pre + "bo");
    lo.ln2_g = at(pre + "ln2_g");
    lo.ln2_b = at(pre + "ln2_b");
    lo.ff1_w = at(pre + "ff1_w");
    lo.ff1_b = at(pre + "ff1_b");
    lo.ff2_w = at(pre + "ff2_w");
    lo.ff2_b = at(pre + "ff2_b");
    o.layers.push_back(lo);
  }
  o.ln_f_g = at("ln_f_g");
  o.ln_f_b = at("ln_f_b");
  o.out_w = at("out_w");
  o.out_b = at("out_b");
  return o;
}

std::vector<double> sinusoidal_pe(int pos, int d) {
  std::vector<double> pe(d, 0.0);
  for (int k = 0; 2 * k < d; ++k) {
    double angle = pos / std::pow(10000.0, (2.0 * k) / d);
    pe[2 * k] = std::sin(angle);
    if (2 * k + 1 < d) pe[2 * k + 1] = std::cos(angle);
  }
  return pe;
}

void check_seq(const Model& m, const TokenSeq& seq) {
  int n = seq.n();
  if (n == 0) throw std::invalid_argument("empty token sequence");
  if (seq.tokens[0].kind != Token::Kind::Action)
    throw std::invalid_argument("first token must be an action");
  if (static_cast<int>(seq.mask.size()) != n * n)
    throw std::invalid_argument("attention mask size mismatch");
  for (const Token& t : seq.tokens)
    if (t.name < 0 ||
        t.name >= static_cast<int>(name_vocab().size()))
      throw std::invalid_argument("token name outside vocabulary");
  (void)m;
}

struct LayerCache {
  std::vector<double> x, y, q, k, v, w, a, x2, y2, hid;
  std::vector<double> m1, r1, m2, r2;
};

struct Cache {
  std::vector<double> e;  // embeddings with positional term
  std::vector<LayerCache> layers;
  std::vector<double> xout;
  double mf = 0, rf = 0;
  double z = 0;
};

// Element embedding into `out` (width d); relu mask recomputed in backward.
void embed_elems(const Model& m, const Off& o, const Token& t, double* out) {
  int d = m.cfg.d;
  const double* P = m.params.data();
  std::vector<double> acc(d, 0.0);
  if (m.cfg.one_hot_names) {
    acc[t.name] += 1.0;
  } else {
    const double* row = P + o.name_table + static_cast<long>(t.name) * d;
    for (int i = 0; i < d; ++i) acc[i] += row[i];
  }
  std::vector<double> tmp(d);
  for (const auto& f : t.objects) {
    matvec(P + o.obj_w, f.data(), tmp.data(), d, kObjectFeatureWidth);
    for (int i = 0; i < d; ++i)
      acc[i] += std::max(0.0, tmp[i] + P[o.obj_b + i]);
  }
  for (const auto& f : t.values) {
    matvec(P + o.val_w, f.data(), tmp.data(), d, kValueFeatureWidth);
    for (int i = 0; i < d; ++i)
      acc[i] += std::max(0.0, tmp[i] + P[o.val_b + i]);
  }
  double cnt = 1.0 + t.objects.size() + t.values.size();
  for (int i = 0; i < d; ++i) out[i] = acc[i] / cnt;
}

void embed_backward(const Model& m, const Off& o, const Token& t,
                    const double* de, double* grad) {
  int d = m.cfg.d;
  const double* P = m.params.data();
  double cnt = 1.0 + t.objects.size() + t.values.size();
  std::vector<double> du(d);
  for (int i = 0; i < d; ++i) du[i] = de[i] / cnt;
  if (!m.cfg.one_hot_names) {
    double* row = grad + o.name_table + static_cast<long>(t.name) * d;
    for (int i = 0; i < d; ++i) row[i] += du[i];
  }
  std::vector<double> pre(d), dpre(d);
  for (const auto& f : t.objects) {
    matvec(P + o.obj_w, f.data(), pre.data(), d, kObjectFeatureWidth);
    for (int i = 0; i < d; ++i)
      dpre[i] = (pre[i] + P[o.obj_b + i] > 0) ? du[i] : 0.0;
    outer_add(grad + o.obj_w, dpre.data(), f.data(), d, kObjectFeatureWidth);
    for (int i = 0; i < d; ++i) grad[o.obj_b + i] += dpre[i];
  }
  for (const auto& f : t.values) {
    matvec(P + o.val_w, f.data(), pre.data(), d, kValueFeatureWidth);
    for (int i = 0; i < d; ++i)
      dpre[i] = (pre[i] + P[o.val_b + i] > 0) ? du[i] : 0.0;
    outer_add(grad + o.val_w, dpre.data(), f.data(), d, kValueFeatureWidth);
    for (int i = 0; i < d; ++i) grad[o.val_b + i] += dpre[i];
  }
}

double logit_forward(const Model& m, const TokenSeq& seq, Cache& c) {
  check_seq(m, seq);
  const int n = seq.n(), d = m.cfg.d, H = m.cfg.heads, F = m.cfg.ff;
  const int dk = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Off o = offsets(m);
  const double* P = m.params.data();

  c.e.assign(static_cast<size_t>(n) * d, 0.0);
  for (int t = 0; t < n; ++t) {
    const Token& tok = seq.tokens[t];
    embed_elems(m, o, tok, &c.e[static_cast<size_t>(t) * d]);
    std::vector<double> pe;
    if (tok.kind == Token::Kind::Init)
      pe.assign(P + o.pe_init, P + o.pe_init + d);
    else if (tok.kind == Token::Kind::Goal)
      pe.assign(P + o.pe_goal, P + o.pe_goal + d);
    else
      pe = sinusoidal_pe(tok.position, d);
    for (int i = 0; i < d; ++i) c.e[static_cast<size_t>(t) * d + i] += pe[i];
  }

  c.layers.assign(m.cfg.layers, {});
  std::vector<double> x = c.e;
  for (int l = 0; l < m.cfg.layers; ++l) {
    const LayerOff& lo = o.layers[l];
    LayerCache& lc = c.layers[l];
    lc.x = x;
    lc.m1.assign(n, 0);
    lc.r1.assign(n, 0);
    lc.y.assign(static_cast<size_t>(n) * d, 0);
    for (int t = 0; t < n; ++t)
      ln_forward(&lc.x[static_cast<size_t>(t) * d], P + lo.ln1_g, P + lo.ln1_b,
                 &lc.y[static_cast<size_t>(t) * d], d, lc.m1[t], lc.r1[t]);
    lc.q.assign(static_cast<size_t>(n) * d, 0);
    lc.k.assign(static_cast<size_t>(n) * d, 0);
    lc.v.assign(static_cast<size_t>(n) * d, 0);
    for (int t = 0; t < n; ++t) {
      const double* yt = &lc.y[static_cast<size_t>(t) * d];
      matvec(P + lo.wq, yt, &lc.q[static_cast<size_t>(t) * d], d, d);
      matvec(P + lo.wk, yt, &lc.k[static_cast<size_t>(t) * d], d, d);
      matvec(P + lo.wv, yt, &lc.v[static_cast<size_t>(t) * d], d, d);
      for (int i = 0; i < d; ++i) {
        lc.q[static_cast<size_t>(t) * d + i] += P[lo.bq + i];
        lc.k[static_cast<size_t>(t) * d + i] += P[lo.bk + i];
        lc.v[static_cast<size_t>(t) * d + i] += P[lo.bv + i];
      }
    }
    lc.w.assign(static_cast<size_t>(H) * n * n, 0.0);
    lc.a.assign(static_cast<size_t>(n) * d, 0.0);
    for (int h = 0; h < H; ++h) {
      for (int qi = 0; qi < n; ++qi) {
        const double* qh = &lc.q[static_cast<size_t>(qi) * d + h * dk];
        double mx = -1e300;
        for (int ki = 0; ki < n; ++ki) {
          if (!seq.mask[qi * n + ki]) continue;
          const double* kh = &lc.k[static_cast<size_t>(ki) * d + h * dk];
          double s = 0;
          for (int i = 0; i < dk; ++i) s += qh[i] * kh[i];
          s *= scale;
          lc.w[(static_cast<size_t>(h) * n + qi) * n + ki] = s;
          mx = std::max(mx, s);
        }
        double denom = 0;
        for (int ki = 0; ki < n; ++ki) {
          if (!seq.mask[qi * n + ki]) continue;
          double& s = lc.w[(static_cast<size_t>(h) * n + qi) * n + ki];
          s = std::exp(s - mx);
          denom += s;
        }
        if (denom <= 0) continue;  // no keys allowed; head output stays zero
        double* arow = &lc.a[static_cast<size_t>(qi) * d + h * dk];
        for (int ki = 0; ki < n; ++ki) {
          if (!seq.mask[qi * n + ki]) continue;
          double& s = lc.w[(static_cast<size_t>(h) * n + qi) * n + ki];
          s /= denom;
          const double* vh = &lc.v[static_cast<size_t>(ki) * d + h * dk];
          for (int i = 0; i < dk; ++i) arow[i] += s * vh[i];
        }
      }
    }
    lc.x2.assign(static_cast<size_t>(n) * d, 0);
    std::vector<double> ot(d);
    for (int t = 0; t < n; ++t) {
      matvec(P + lo.wo, &lc.a[static_cast<size_t>(t) * d], ot.data(), d, d);
      for (int i = 0; i < d; ++i)
        lc.x2[static_cast<size_t>(t) * d + i] =
            lc.x[static_cast<size_t>(t) * d + i] + ot[i] + P[lo.bo + i];
    }
    lc.m2.assign(n, 0);
    lc.r2.assign(n, 0);
    lc.y2.assign(static_cast<size_t>(n) * d, 0);
    for (int t = 0; t < n; ++t)
      ln_forward(&lc.x2[static_cast<size_t>(t) * d], P + lo.ln2_g,
                 P + lo.ln2_b, &lc.y2[static_cast<size_t>(t) * d], d, lc.m2[t],
                 lc.r2[t]);
    lc.hid.assign(static_cast<size_t>(n) * F, 0);
    x.assign(static_cast<size_t>(n) * d, 0);
    std::vector<double> ft(d);
    for (int t = 0; t < n; ++t) {
      double* hid = &lc.hid[static_cast<size_t>(t) * F];
      matvec(P + lo.ff1_w, &lc.y2[static_cast<size_t>(t) * d], hid, F, d);
      for (int i = 0; i < F; ++i)
        hid[i] = std::max(0.0, hid[i] + P[lo.ff1_b + i]);
      matvec(P + lo.ff2_w, hid, ft.data(), d, F);
      for (int i = 0; i < d; ++i)
        x[static_cast<size_t>(t) * d + i] =
            lc.x2[static_cast<size_t>(t) * d + i] + ft[i] + P[lo.ff2_b + i];
    }
  }
  c.xout = x;

  std::vector<double> yf0(d);
  ln_forward(c.xout.data(), P + o.ln_f_g, P + o.ln_f_b, yf0.data(), d, c.mf,
             c.rf);
  double z = P[o.out_b];
  for (int i = 0; i < d; ++i) z += P[o.out_w + i] * yf0[i];
  c.z = z;
  return z;
}

void backward(const Model& m, const TokenSeq& seq, const Cache& c, double dz,
              double* grad) {
  const int n = seq.n(), d = m.cfg.d, H = m.cfg.heads, F = m.cfg.ff;
  const int dk = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Off o = offsets(m);
  const double* P = m.params.data();

  std::vector<double> yf0(d);
  {
    double mf, rf;
    ln_forward(c.xout.data(), P + o.ln_f_g, P + o.ln_f_b, yf0.data(), d, mf,
               rf);
  }
  std::vector<double> dyf0(d);
  for (int i = 0; i < d; ++i) {
    dyf0[i] = dz * P[o.out_w + i];
    grad[o.out_w + i] += dz * yf0[i];
  }
  grad[o.out_b] += dz;

  std::vector<double> dx(static_cast<size_t>(n) * d, 0.0);
  ln_backward(c.xout.data(), P + o.ln_f_g, c.mf, c.rf, dyf0.data(), dx.data(),
              grad + o.ln_f_g, grad + o.ln_f_b, d);

  std::vector<double> dy2(d), dhid(F), dx2(static_cast<size_t>(n) * d);
  std::vector<double> dy(static_cast<size_t>(n) * d);
  std::vector<double> dq(static_cast<size_t>(n) * d),
      dkv(static_cast<size_t>(n) * d), dv(static_cast<size_t>(n) * d);
  std::vector<double> da(static_cast<size_t>(n) * d), do_(d);

  for (int l = m.cfg.layers - 1; l >= 0; --l) {
    const LayerOff& lo = o.layers[l];
    const LayerCache& lc = c.layers[l];
    std::fill(dx2.begin(), dx2.end(), 0.0);

    // feed-forward branch; dx holds d(layer output)
    for (int t = 0; t < n; ++t) {
      const double* dxt = &dx[static_cast<size_t>(t) * d];
      const double* hid = &lc.hid[static_cast<size_t>(t) * F];
      for (int i = 0; i < d; ++i) {
        dx2[static_cast<size_t>(t) * d + i] += dxt[i];  // residual
        grad[lo.ff2_b + i] += dxt[i];
      }
      outer_add(grad + lo.ff2_w, dxt, hid, d, F);
      std::fill(dhid.begin(), dhid.end(), 0.0);
      matvec_t_add(P + lo.ff2_w, dxt, dhid.data(), d, F);
      for (int i = 0; i < F; ++i)
        dhid[i] = hid[i] > 0 ? dhid[i] : 0.0;  // relu(pre) > 0 iff pre > 0
      outer_add(grad + lo.ff1_w, dhid.data(),
                &lc.y2[static_cast<size_t>(t) * d], F, d);
      for (int i = 0; i < F; ++i) grad[lo.ff1_b + i] += dhid[i];
      std::fill(dy2.begin(), dy2.end(), 0.0);
      matvec_t_add(P + lo.ff1_w, dhid.data(), dy2.data(), F, d);
      ln_backward(&lc.x2[static_cast<size_t>(t) * d], P + lo.ln2_g, lc.m2[t],
                  lc.r2[t], dy2.data(), &dx2[static_cast<size_t>(t) * d],
                  grad + lo.ln2_g, grad + lo.ln2_b, d);
    }

    // attention branch; dx2 now carries d(x after attention residual)
    std::fill(da.begin(), da.end(), 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    for (int t = 0; t < n; ++t) {
      const double* dx2t = &dx2[static_cast<size_t>(t) * d];
      for (int i = 0; i < d; ++i) {
        dx[static_cast<size_t>(t) * d + i] += dx2t[i];  // residual
        grad[lo.bo + i] += dx2t[i];
      }
      outer_add(grad + lo.wo, dx2t, &lc.a[static_cast<size_t>(t) * d], d, d);
      matvec_t_add(P + lo.wo, dx2t, &da[static_cast<size_t>(t) * d], d, d);
    }
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dkv.begin(), dkv.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (int h = 0; h < H; ++h) {
      for (int qi = 0; qi < n; ++qi) {
        const double* dah = &da[static_cast<size_t>(qi) * d + h * dk];
        double dwsum = 0;
        // dw_k = da . v_k; softmax backward needs sum_k w_k dw_k
        for (int ki = 0; ki < n; ++ki) {
          if (!seq.mask[qi * n + ki]) continue;
          double w = lc.w[(static_cast<size_t>(h) * n + qi) * n + ki];
          const double* vh = &lc.v[static_cast<size_t>(ki) * d + h * dk];
          double dwk = 0;
          for (int i = 0; i < dk; ++i) dwk += dah[i] * vh[i];
          dwsum += w * dwk;
        }
        const double* qh = &lc.q[static_cast<size_t>(qi) * d + h * dk];
        for (int ki = 0; ki < n; ++ki) {
          if (!seq.mask[qi * n + ki]) continue;
          double w = lc.w[(static_cast<size_t>(h) * n + qi) * n + ki];
          const double* vh = &lc.v[static_cast<size_t>(ki) * d + h * dk];
          double dwk = 0;
          for (int i = 0; i < dk; ++i) dwk += dah[i] * vh[i];
          double ds = w * (dwk - dwsum);
          double* dvh = &dv[static_cast<size_t>(ki) * d + h * dk];
          for (int i = 0; i < dk; ++i) dvh[i] += w * dah[i];
          const double* kh = &lc.k[static_cast<size_t>(ki) * d + h * dk];
          double* dqh = &dq[static_cast<size_t>(qi) * d + h * dk];
          double* dkh = &dkv[static_cast<size_t>(ki) * d + h * dk];
          for (int i = 0; i < dk; ++i) {
            dqh[i] += ds * kh[i] * scale;
            dkh[i] += ds * qh[i] * scale;
          }
        }
      }
    }
    std::fill(dy.begin(), dy.end(), 0.0);
    for (int t = 0; t < n; ++t) {
      const double* yt = &lc.y[static_cast<size_t>(t) * d];
      const double* dqt = &dq[static_cast<size_t>(t) * d];
      const double* dkt = &dkv[static_cast<size_t>(t) * d];
      const double* dvt = &dv[static_cast<size_t>(t) * d];
      outer_add(grad + lo.wq, dqt, yt, d, d);
      outer_add(grad + lo.wk, dkt, yt, d, d);
      outer_add(grad + lo.wv, dvt, yt, d, d);
      for (int i = 0; i < d; ++i) {
        grad[lo.bq + i] += dqt[i];
        grad[lo.bk + i] += dkt[i];
        grad[lo.bv + i] += dvt[i];
      }
      double* dyt = &dy[static_cast<size_t>(t) * d];
      matvec_t_add(P + lo.wq, dqt, dyt, d, d);
      matvec_t_add(P + lo.wk, dkt, dyt, d, d);
      matvec_t_add(P + lo.wv, dvt, dyt, d, d);
      ln_backward(&lc.x[static_cast<size_t>(t) * d], P + lo.ln1_g, lc.m1[t],
                  lc.r1[t], dyt, &dx[static_cast<size_t>(t) * d],
                  grad + lo.ln1_g, grad + lo.ln1_b, d);
    }
  }

  // dx is now the embedding gradient
  for (int t = 0; t < n; ++t) {
    const Token& tok = seq.tokens[t];
    const double* de = &dx[static_cast<size_t>(t) * d];
    if (tok.kind == Token::Kind::Init)
      for (int i = 0; i < d; ++i) grad[o.pe_init + i] += de[i];
    else if (tok.kind == Token::Kind::Goal)
      for (int i = 0; i < d; ++i) grad[o.pe_goal + i] += de[i];
    embed_backward(m, o, tok, de, grad);
  }
}

double example_loss_grad(const Model& m, const Example& ex, double* grad) {
  Cache c;
  double z = logit_forward(m, ex.seq, c);
  double loss = bce_from_logit(z, ex.label);
  backward(m, ex.seq, c, sigmoid(z) - ex.label, grad);
  return loss;
}

// Per-example buffers reduced in index order; the serial and OpenMP
// variants share this so their results are bitwise identical.
double batch_loss_grad(const Model& m, const std::vector<const Example*>& batch,
                       std::vector<double>& grad, bool parallel) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  long pcount = m.parameter_count();
  size_t b = batch.size();
  std::vector<std::vector<double>> gbuf(b);
  std::vector<double> losses(b, 0.0);
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < static_cast<long>(b); ++i) {
    gbuf[i].assign(pcount, 0.0);
    losses[i] = example_loss_grad(m, *batch[i], gbuf[i].data());
  }
  grad.assign(pcount, 0.0);
  double loss = 0;
  for (size_t i = 0; i < b; ++i) {
    loss += losses[i];
    for (long j = 0; j < pcount; ++j) grad[j] += gbuf[i][j];
  }
  loss /= static_cast<double>(b);
  for (double& g : grad) g /= static_cast<double>(b);
  if (!std::isfinite(loss))
    throw NonFiniteLossError("batch loss is not finite");
  return loss;
}

void write_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}
void write_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void write_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
void write_f64(std::ostream& os, double d) {
  write_u64(os, std::bit_cast<uint64_t>(d));
}
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path)
      : in(path, std::ios::binary) {
    if (!in) throw ModelFormatError("cannot open model file: " + path);
  }
  void bytes(char* dst, size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
      throw ModelFormatError("model file truncated");
  }
  uint16_t u16() {
    unsigned char b[2];
    bytes(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    uint32_t n = u32();
    if (n > (1u << 20)) throw ModelFormatError("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_eof() {
    in.peek();
    return in.eof();
  }
};

}  // namespace

const std::vector<std::string>& name_vocab() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (int i = 0; i < kNumPreds; ++i)
      v.push_back(pred_info(static_cast<Pred>(i)).name);
    for (const ActionSchema& s : builtin_schemas())
      if (std::find(v.begin(), v.end(), s.display) == v.end())
        v.push_back(s.display);
    return v;
  }();
  return vocab;
}

int name_index(const std::string& name) {
  const auto& v = name_vocab();
  for (size_t i = 0; i < v.size(); ++i)
    if (v[i] == name) return static_cast<int>(i);
  return -1;
}

std::array<double, kObjectFeatureWidth> object_feature(const Problem& p,
                                                       ObjId o) {
  const World2D& w = *p.world;
  const ObjectInfo& info = p.objects[o];
  std::array<double, kObjectFeatureWidth> f{};
  f[static_cast<int>(info.category)] = 1.0;
  double dx = 0, dy = 0;
  int color = -1;
  double limit = 0;
  switch (info.category) {
    case ObjectCategory::Item: {
      const ItemGeom& it = w.items[w.item_index(info.id)];
      dx = dy = 2 * it.radius;
      color = it.color;
      break;
    }
    case ObjectCategory::Surface: {
      const Rect& r = w.surfaces[w.surface_index(info.id)].rect;
      dx = r.width();
      dy = r.height();
      break;
    }
    case ObjectCategory::Container: {
      const Rect& r = w.containers[w.container_index(info.id)].body;
      dx = r.width();
      dy = r.height();
      break;
    }
    case ObjectCategory::Door: {
      const ContainerGeom& c = w.containers[w.container_of_door(info.id)];
      dx = c.door_length();
      dy = c.door_thickness;
      limit = c.door_limit;
      break;
    }
    case ObjectCategory::Space: {
      Rect r = w.containers[w.container_of_space(info.id)].interior();
      dx = r.width();
      dy = r.height();
      break;
    }
    case ObjectCategory::Robot:
      dx = dy = 2 * w.robot.radius;
      break;
  }
  f[6] = dx;
  f[7] = dy;
  if (color >= 0 && color < 8) f[8 + color] = 1.0;
  f[16] = limit;
  return f;
}

std::array<double, kValueFeatureWidth> value_feature(const Value& v) {
  std::array<double, kValueFeatureWidth> f{};
  f[static_cast<int>(v.kind)] = 1.0;
  switch (v.kind) {
    case ValueKind::Pose:
      for (int i = 0; i < 3; ++i) f[5 + i] = v.data[i];
      break;
    case ValueKind::Grasp:
      for (int i = 0; i < 3; ++i) f[8 + i] = v.data[i];
      break;
    case ValueKind::BaseConf:
      for (int i = 0; i < 3; ++i) f[11 + i] = v.data[i];
      break;
    case ValueKind::JointAngle:
      f[14] = v.data[0];
      break;
    case ValueKind::Trajectory:
      break;  // kind bit only
  }
  return f;
}

namespace {

Token literal_token(const Problem& p, const Literal& lit, Token::Kind kind,
                    const PredictorConfig& cfg) {
  Token t;
  t.kind = kind;
  t.name = name_index(pred_info(lit.pred).name);
  for (const Term& a : lit.args) {
    if (const ObjId* o = std::get_if<ObjId>(&a)) {
      if (!cfg.drop_object_features) t.objects.push_back(object_feature(p, *o));
    } else if (const Value* v = std::get_if<Value>(&a)) {
      bool drop = cfg.drop_values == DropValues::All ||
                  (cfg.drop_values == DropValues::Poses &&
                   v->kind == ValueKind::Pose) ||
                  (cfg.drop_values == DropValues::Angles &&
                   v->kind == ValueKind::JointAngle);
      if (!drop) t.values.push_back(value_feature(*v));
    }
  }
  return t;
}

}  // namespace

TokenSeq tokenize(const Problem& p, const StrippedPlan& plan,
                  const PredictorConfig& cfg, Rng& rng) {
  TokenSeq seq;
  seq.n_action = static_cast<int>(plan.size());
  seq.n_goal = static_cast<int>(p.goal.size());
  if (seq.n_action + seq.n_goal > cfg.max_seq)
    throw TokenOverflowError(
        "actions + goal exceed max sequence length: " +
        std::to_string(seq.n_action + seq.n_goal) + " > " +
        std::to_string(cfg.max_seq));

  for (size_t i = 0; i < plan.size(); ++i) {
    Token t;
    t.kind = Token::Kind::Action;
    t.name = name_index(plan[i].name);
    t.position = static_cast<int>(i);
    if (!cfg.drop_object_features)
      for (ObjId o : plan[i].objects)
        t.objects.push_back(object_feature(p, o));
    seq.tokens.push_back(std::move(t));
  }
  for (const Literal& g : p.goal)
    seq.tokens.push_back(literal_token(p, g, Token::Kind::Goal, cfg));

  if (!cfg.drop_init) {
    int room = cfg.max_seq - seq.n_action - seq.n_goal;
    std::vector<int> keep(p.init.lits.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (static_cast<int>(keep.size()) > room) {
      rng.shuffle(keep);
      keep.resize(room);
      // canonical order for the kept subset; init order never matters
      std::sort(keep.begin(), keep.end(), [&](int a, int b) {
        return literal_less(p.init.lits[a], p.init.lits[b]);
      });
    }
    for (int ix : keep)
      seq.tokens.push_back(
          literal_token(p, p.init.lits[ix], Token::Kind::Init, cfg));
    seq.n_init = static_cast<int>(keep.size());
  }

  int n = seq.n();
  seq.mask.assign(static_cast<size_t>(n) * n, 0);
  for (int q = 0; q < n; ++q) {
    bool q_action = q < seq.n_action;
    for (int k = 0; k < n; ++k) {
      bool k_action = k < seq.n_action;
      // actions are causal among themselves; everything else is open
      seq.mask[q * n + k] = (!q_action || !k_action || k <= q) ? 1 : 0;
    }
  }
  return seq;
}

int Model::block_index(const std::string& name) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].name == name) return static_cast<int>(i);
  return -1;
}

double* Model::block(const std::string& name) {
  int i = block_index(name);
  if (i < 0) throw std::logic_error("no parameter block " + name);
  return params.data() + blocks[i].offset;
}

const double* Model::block(const std::string& name) const {
  int i = block_index(name);
  if (i < 0) throw std::logic_error("no parameter block " + name);
  return params.data() + blocks[i].offset;
}

Model make_model(const PredictorConfig& cfg) {
  if (cfg.d <= 0 || cfg.layers < 0 || cfg.heads <= 0 || cfg.ff <= 0 ||
      cfg.max_seq <= 0)
    throw std::invalid_argument("bad model dimensions");
  if (cfg.d % cfg.heads != 0)
    throw std::invalid_argument("model width must divide into heads");
  int vocab = static_cast<int>(name_vocab().size());
  if (cfg.one_hot_names && vocab > cfg.d)
    throw std::invalid_argument(
        "one-hot names need model width >= vocabulary size");

  Model m;
  m.cfg = cfg;
  long off = 0;
  auto add = [&](const std::string& name, int rows, int cols) {
    m.blocks.push_back({name, rows, cols, off});
    off += static_cast<long>(rows) * cols;
  };
  add("name_table", vocab, cfg.d);
  add("obj_w", cfg.d, kObjectFeatureWidth);
  add("obj_b", cfg.d, 1);
  add("val_w", cfg.d, kValueFeatureWidth);
  add("val_b", cfg.d, 1);
  add("pe_init", cfg.d, 1);
  add("pe_goal", cfg.d, 1);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + "ln1_g", cfg.d, 1);
    add(pre + "ln1_b", cfg.d, 1);
    add(pre + "wq", cfg.d, cfg.d);
    add(pre + "bq", cfg.d, 1);
    add(pre + "wk", cfg.d, cfg.d);
    add(pre + "bk", cfg.d, 1);
    add(pre + "wv", cfg.d, cfg.d);
    add(pre + "bv", cfg.d, 1);
    add(pre + "wo", cfg.d, cfg.d);
    add(pre + "bo", cfg.d, 1);
    add(pre + "ln2_g", cfg.d, 1);
    add(pre + "ln2_b", cfg.d, 1);
    add(pre + "ff1_w", cfg.ff, cfg.d);
    add(pre + "ff1_b", cfg.ff, 1);
    add(pre + "ff2_w", cfg.d, cfg.ff);
    add(pre + "ff2_b", cfg.d, 1);
  }
  add("ln_f_g", cfg.d, 1);
  add("ln_f_b", cfg.d, 1);
  add("out_w", 1, cfg.d);
  add("out_b", 1, 1);
  m.params.assign(off, 0.0);
  return m;
}

void init_params(Model& m, uint64_t seed) {
  for (size_t bi = 0; bi < m.blocks.size(); ++bi) {
    const ParamBlock& b = m.blocks[bi];
    Rng rng = Rng::stream(seed, 0x6d6f64, bi);
    double* p = m.params.data() + b.offset;
    bool is_gain = b.name.size() >= 2 &&
                   (b.name.rfind("_g") == b.name.size() - 2) &&
                   b.name.find("ln") != std::string::npos;
    bool relu_bias =
        b.name == "obj_b" || b.name == "val_b" ||
        (b.name.size() > 6 && b.name.rfind("ff1_b") == b.name.size() - 5);
    bool is_bias = b.cols == 1 && b.name != "pe_init" && b.name != "pe_goal";
    for (long i = 0; i < b.size(); ++i) {
      if (is_gain)
        p[i] = 1.0;
      else if (relu_bias)
        p[i] = 0.5;
      else if (is_bias)
        p[i] = 0.0;
      else
        p[i] = 0.1 * rng.normal();
    }
  }
}

std::vector<double> embed_name(const Model& m, int vocab_index) {
  std::vector<double> out(m.cfg.d, 0.0);
  if (vocab_index < 0 ||
      vocab_index >= static_cast<int>(name_vocab().size()))
    throw std::invalid_argument("vocab index out of range");
  if (m.cfg.one_hot_names) {
    out[vocab_index] = 1.0;
  } else {
    const double* row =
        m.block("name_table") + static_cast<long>(vocab_index) * m.cfg.d;
    out.assign(row, row + m.cfg.d);
  }
  return out;
}

std::vector<double> embed_object(
    const Model& m, const std::array<double, kObjectFeatureWidth>& f) {
  std::vector<double> out(m.cfg.d);
  matvec(m.block("obj_w"), f.data(), out.data(), m.cfg.d, kObjectFeatureWidth);
  const double* b = m.block("obj_b");
  for (int i = 0; i < m.cfg.d; ++i) out[i] = std::max(0.0, out[i] + b[i]);
  return out;
}

std::vector<double> embed_value(const Model& m,
                                const std::array<double, kValueFeatureWidth>& f) {
  std::vector<double> out(m.cfg.d);
  matvec(m.block("val_w"), f.data(), out.data(), m.cfg.d, kValueFeatureWidth);
  const double* b = m.block("val_b");
  for (int i = 0; i < m.cfg.d; ++i) out[i] = std::max(0.0, out[i] + b[i]);
  return out;
}

std::vector<double> positional_term(const Model& m, Token::Kind kind,
                                    int position) {
  if (kind == Token::Kind::Init) {
    const double* p = m.block("pe_init");
    return std::vector<double>(p, p + m.cfg.d);
  }
  if (kind == Token::Kind::Goal) {
    const double* p = m.block("pe_goal");
    return std::vector<double>(p, p + m.cfg.d);
  }
  return sinusoidal_pe(position, m.cfg.d);
}

std::vector<double> fuse_token(const Model& m, const Token& t) {
  Off o = offsets(m);
  std::vector<double> out(m.cfg.d);
  embed_elems(m, o, t, out.data());
  std::vector<double> pe = positional_term(m, t.kind, t.position);
  for (int i = 0; i < m.cfg.d; ++i) out[i] += pe[i];
  return out;
}

double forward(const Model& m, const TokenSeq& seq) {
  Cache c;
  return sigmoid(logit_forward(m, seq, c));
}

double loss_and_gradients(const Model& m,
                          const std::vector<const Example*>& batch,
                          std::vector<double>& grad) {
  return batch_loss_grad(m, batch, grad, false);
}

double loss_and_gradients_parallel(const Model& m,
                                   const std::vector<const Example*>& batch,
                                   std::vector<double>& grad) {
  return batch_loss_grad(m, batch, grad, true);
}

namespace {

std::vector<double> logit_batch(const Model& m,
                                const std::vector<TokenSeq>& seqs,
                                bool parallel) {
  std::vector<double> z(seqs.size(), 0.0);
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < static_cast<long>(seqs.size()); ++i) {
    Cache c;
    z[i] = logit_forward(m, seqs[i], c);
  }
  return z;
}

std::pair<double, double> eval_set(const Model& m,
                                   const std::vector<Example>& set,
                                   bool parallel) {
  if (set.empty()) return {0.0, 0.0};
  std::vector<TokenSeq> seqs;
  seqs.reserve(set.size());
  for (const Example& e : set) seqs.push_back(e.seq);
  std::vector<double> z = logit_batch(m, seqs, parallel);
  double loss = 0, acc = 0;
  for (size_t i = 0; i < set.size(); ++i) {
    loss += bce_from_logit(z[i], set[i].label);
    bool hit = (z[i] >= 0) == (set[i].label >= 0.5);
    acc += hit ? 1.0 : 0.0;
  }
  return {loss / set.size(), acc / set.size()};
}

}  // namespace

std::vector<double> forward_batch_serial(const Model& m,
                                         const std::vector<TokenSeq>& seqs) {
  std::vector<double> z = logit_batch(m, seqs, false);
  for (double& v : z) v = sigmoid(v);
  return z;
}

std::vector<double> forward_batch(const Model& m,
                                  const std::vector<TokenSeq>& seqs) {
  std::vector<double> z = logit_batch(m, seqs, true);
  for (double& v : z) v = sigmoid(v);
  return z;
}

TrainReport train(Model& m, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainOptions& opt,
                  uint64_t seed) {
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  bool has0 = false, has1 = false;
  for (const Example& e : train_set) (e.label >= 0.5 ? has1 : has0) = true;
  if (!has0 || !has1)
    throw std::invalid_argument("training set needs both labels");

  TrainReport report;
  long pcount = m.parameter_count();
  std::vector<double> grad, mbuf(pcount, 0.0), vbuf(pcount, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;
  int consecutive_bad = 0;

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng shuf = Rng::stream(seed, 0x657063, static_cast<uint64_t>(epoch));
    shuf.shuffle(order);
    for (size_t at = 0; at < order.size(); at += opt.batch_size) {
      std::vector<const Example*> batch;
      for (size_t i = at; i < order.size() &&
                          i < at + static_cast<size_t>(opt.batch_size);
           ++i)
        batch.push_back(&train_set[order[i]]);
      double loss;
      try {
        loss = batch_loss_grad(m, batch, grad, opt.parallel);
      } catch (const NonFiniteLossError&) {
        report.step_losses.push_back(
            std::numeric_limits<double>::quiet_NaN());
        if (++consecutive_bad >= 3)
          throw DivergenceError(
              "loss non-finite for 3 consecutive steps");
        continue;
      }
      consecutive_bad = 0;
      report.step_losses.push_back(loss);
      ++step;
      double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (long j = 0; j < pcount; ++j) {
        mbuf[j] = b1 * mbuf[j] + (1 - b1) * grad[j];
        vbuf[j] = b2 * vbuf[j] + (1 - b2) * grad[j] * grad[j];
        m.params[j] -=
            opt.lr * (mbuf[j] / c1) / (std::sqrt(vbuf[j] / c2) + eps);
      }
    }
    EpochRecord rec;
    auto [tl, ta] = eval_set(m, train_set, opt.parallel);
    auto [vl, va] = eval_set(m, val_set, opt.parallel);
    rec.train_loss = tl;
    rec.train_acc = ta;
    rec.val_loss = vl;
    rec.val_acc = va;
    report.epochs.push_back(rec);
  }
  return report;
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ModelFormatError("cannot write model file: " + path);
  os.write("PIGI", 4);
  write_u16(os, kModelVersion);
  write_u32(os, static_cast<uint32_t>(m.cfg.d));
  write_u32(os, static_cast<uint32_t>(m.cfg.layers));
  write_u32(os, static_cast<uint32_t>(m.cfg.heads));
  write_u32(os, static_cast<uint32_t>(m.cfg.ff));
  write_u32(os, static_cast<uint32_t>(m.cfg.max_seq));
  os.put(m.cfg.one_hot_names ? 1 : 0);
  os.put(m.cfg.drop_object_features ? 1 : 0);
  os.put(static_cast<char>(m.cfg.drop_values));
  os.put(m.cfg.drop_init ? 1 : 0);
  const auto& vocab = name_vocab();
  write_u32(os, static_cast<uint32_t>(vocab.size()));
  for (const std::string& s : vocab) write_str(os, s);
  write_u32(os, static_cast<uint32_t>(m.blocks.size()));
  for (const ParamBlock& b : m.blocks) {
    write_str(os, b.name);
    write_u32(os, static_cast<uint32_t>(b.rows));
    write_u32(os, static_cast<uint32_t>(b.cols));
  }
  write_u64(os, static_cast<uint64_t>(m.params.size()));
  for (double d : m.params) write_f64(os, d);
  if (!os) throw ModelFormatError("short write to model file: " + path);
}

Model load_model(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "PIGI", 4) != 0)
    throw ModelFormatError("bad magic bytes");
  uint16_t version = r.u16();
  if (version != kModelVersion)
    throw ModelVersionError("model file version " + std::to_string(version) +
                            ", expected " + std::to_string(kModelVersion));
  PredictorConfig cfg;
  cfg.d = static_cast<int>(r.u32());
  cfg.layers = static_cast<int>(r.u32());
  cfg.heads = static_cast<int>(r.u32());
  cfg.ff = static_cast<int>(r.u32());
  cfg.max_seq = static_cast<int>(r.u32());
  char flags[4];
  r.bytes(flags, 4);
  cfg.one_hot_names = flags[0] != 0;
  cfg.drop_object_features = flags[1] != 0;
  if (flags[2] < 0 || flags[2] > 3)
    throw ModelFormatError("bad drop-values flag");
  cfg.drop_values = static_cast<DropValues>(flags[2]);
  cfg.drop_init = flags[3] != 0;
  if (cfg.d > (1 << 16) || cfg.layers > 4096 || cfg.heads > 4096 ||
      cfg.ff > (1 << 20) || cfg.max_seq > (1 << 20))
    throw ModelFormatError("implausible model dimensions");

  Model m;
  try {
    m = make_model(cfg);
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("bad model config: ") + e.what());
  }

  uint32_t vn = r.u32();
  const auto& vocab = name_vocab();
  if (vn != vocab.size()) throw ModelFormatError("vocabulary size mismatch");
  for (uint32_t i = 0; i < vn; ++i)
    if (r.str() != vocab[i]) throw ModelFormatError("vocabulary mismatch");

  uint32_t bn = r.u32();
  if (bn != m.blocks.size())
    throw ModelFormatError("parameter block count mismatch");
  for (uint32_t i = 0; i < bn; ++i) {
    std::string name = r.str();
    int rows = static_cast<int>(r.u32());
    int cols = static_cast<int>(r.u32());
    if (name != m.blocks[i].name || rows != m.blocks[i].rows ||
        cols != m.blocks[i].cols)
      throw ModelFormatError("parameter block manifest mismatch at " + name);
  }
  uint64_t pn = r.u64();
  if (pn != m.params.size())
    throw ModelFormatError("parameter count mismatch");
  for (uint64_t i = 0; i < pn; ++i) m.params[i] = r.f64();
  if (!r.at_eof()) throw ModelFormatError("trailing data in model file");
  return m;
}

}  // namespace pigi
