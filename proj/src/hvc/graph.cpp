#include "hvc/graph.hpp"

#include <cmath>

#include "hvc/detmath.hpp"

namespace hvc {

void tensor_axpy(const Tensor& x, double a, Tensor& y) {
    check(x.dtype() == y.dtype() && x.numel() == y.numel(), ErrorKind::Internal,
          "axpy operand mismatch");
    dtype_dispatch(x.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto xs = x.data<S>();
        auto ys = y.data<S>();
        S av = static_cast<S>(a);
        for (size_t i = 0; i < xs.size(); ++i) ys[i] += av * xs[i];
    });
}

namespace {

void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    check(a.dtype() == b.dtype(), ErrorKind::Config,
          std::string(op) + ": mixed dtypes " + dtype_name(a.dtype()) + " vs " +
              dtype_name(b.dtype()));
}

} // namespace

void Graph::ensure_grad(Node& n) {
    if (!n.grad.defined()) n.grad = Tensor::zeros(n.value.shape(), n.value.dtype());
}

Node* Graph::make_node(Tensor value, std::vector<Node*> parents,
                       std::function<void(Node&)> backfn) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    bool track = false;
    if (recording_) {
        for (Node* p : parents) {
            if (p && p->requires_grad) track = true;
        }
    }
    if (track) {
        n.requires_grad = true;
        n.parents = std::move(parents);
        n.backfn = std::move(backfn);
    }
    return &n;
}

Var Graph::leaf(Tensor value, bool requires_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    return Var{&n};
}

Var Graph::param(ParamId id) {
    check(store_ != nullptr, ErrorKind::Usage, "graph has no parameter store bound");
    auto it = param_nodes_.find(id);
    if (it != param_nodes_.end()) return Var{it->second};
    Var v = leaf(store_->at(id).value, true);
    param_nodes_[id] = v.node;
    return v;
}

const Tensor& Graph::val(Var v) const {
    check(v.defined(), ErrorKind::Internal, "undefined Var");
    return v.node->value;
}

const Tensor& Graph::grad(Var v) const {
    check(v.defined() && v.node->grad.defined(), ErrorKind::Usage, "no gradient on this Var");
    return v.node->grad;
}

void Graph::backward(Var loss) {
    check(recording_, ErrorKind::Usage, "backward on a non-recording graph");
    check(!backward_done_, ErrorKind::Usage, "backward already ran on this graph");
    check(loss.defined() && loss.node->value.numel() == 1, ErrorKind::Usage,
          "backward expects a scalar loss");
    check(loss.node->requires_grad, ErrorKind::Usage,
          "backward on a detached graph: loss does not depend on tracked values");
    backward_done_ = true;
    ensure_grad(*loss.node);
    loss.node->grad.fill(1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = *it;
        if (!n.grad.defined() || !n.backfn) continue;
        for (Node* p : n.parents) {
            if (p && p->requires_grad) ensure_grad(*p);
        }
        n.backfn(n);
    }
}

void Graph::accumulate_param_grads(double scl) {
    check(store_ != nullptr, ErrorKind::Usage, "graph has no parameter store bound");
    for (auto& [id, node] : param_nodes_) {
        if (node->grad.defined()) tensor_axpy(node->grad, scl, store_->at(id).grad);
    }
}

// --------------------------------------------------------------------------
// ops

Var Graph::conv2d(Var x, Var w, Var b, const ConvSpec& spec) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    check_same_dtype(xv, wv, "conv2d");
    check_same_dtype(xv, bv, "conv2d");
    ConvDims d = conv_check(xv.shape(), wv.shape(), bv.shape(), spec);
    Tensor y = Tensor::zeros({d.n, d.cout, d.ho, d.wo}, xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        kern::conv2d_fwd<S>(xv.data<S>().data(), wv.data<S>().data(), bv.data<S>().data(),
                            y.data<S>().data(), d);
    });
    Node* nx = x.node;
    Node* nw = w.node;
    Node* nb = b.node;
    return Var{make_node(std::move(y), {nx, nw, nb}, [nx, nw, nb, d](Node& n) {
        dtype_dispatch(n.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            const S* dy = n.grad.data<S>().data();
            if (nx->requires_grad) {
                kern::conv2d_bwd_x<S>(nw->value.data<S>().data(), dy, nx->grad.data<S>().data(),
                                      d);
            }
            if (nw->requires_grad || nb->requires_grad) {
                kern::conv2d_bwd_w<S>(nx->value.data<S>().data(), dy,
                                      nw->requires_grad ? nw->grad.data<S>().data() : nullptr,
                                      nb->requires_grad ? nb->grad.data<S>().data() : nullptr, d);
            }
        });
    })};
}

Var Graph::pixel_shuffle_up(Var x, int64_t r) {
    const Tensor& xv = val(x);
    check(xv.rank() == 4, ErrorKind::Config, "pixel_shuffle expects NCHW");
    check(r >= 1 && xv.dim(1) % (r * r) == 0, ErrorKind::Config,
          "pixel_shuffle: channels " + std::to_string(xv.dim(1)) + " not divisible by r^2=" +
              std::to_string(r * r));
    int64_t n = xv.dim(0), c_out = xv.dim(1) / (r * r), h = xv.dim(2), w = xv.dim(3);
    Tensor y = Tensor::zeros({n, c_out, h * r, w * r}, xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        kern::pixel_shuffle<S>(xv.data<S>().data(), y.data<S>().data(), n, c_out, h, w, r, false);
    });
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx, n, c_out, h, w, r](Node& nd) {
        if (!nx->requires_grad) return;
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            Tensor tmp = Tensor::zeros(nx->value.shape(), nd.value.dtype());
            kern::pixel_shuffle<S>(nd.grad.data<S>().data(), tmp.data<S>().data(), n, c_out, h, w,
                                   r, true);
            tensor_axpy(tmp, 1.0, nx->grad);
        });
    })};
}

Var Graph::layer_norm_channels(Var x, Var gamma, Var beta, double eps) {
    const Tensor& xv = val(x);
    const Tensor& gv = val(gamma);
    const Tensor& bv = val(beta);
    check(xv.rank() == 4, ErrorKind::Config, "layer_norm expects NCHW");
    int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
    check(gv.numel() == c && bv.numel() == c, ErrorKind::Config, "layer_norm: bad gamma/beta");
    Tensor y = Tensor::zeros(xv.shape(), xv.dtype());
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(n * hw));
    auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(n * hw));
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        kern::layer_norm_fwd<S>(xv.data<S>().data(), gv.data<S>().data(), bv.data<S>().data(),
                                y.data<S>().data(), mean->data(), rstd->data(), n, c, hw, eps);
    });
    Node* nx = x.node;
    Node* ng = gamma.node;
    Node* nb = beta.node;
    return Var{make_node(std::move(y), {nx, ng, nb}, [nx, ng, nb, mean, rstd, n, c, hw](Node& nd) {
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            // gamma/beta grads always needed if tracked; dx optional
            Tensor dx = Tensor::zeros(nx->value.shape(), nd.value.dtype());
            Tensor dg = Tensor::zeros({c}, nd.value.dtype());
            Tensor db = Tensor::zeros({c}, nd.value.dtype());
            kern::layer_norm_bwd<S>(nx->value.data<S>().data(), ng->value.data<S>().data(),
                                    nd.grad.data<S>().data(), mean->data(), rstd->data(),
                                    dx.data<S>().data(), dg.data<S>().data(),
                                    db.data<S>().data(), n, c, hw);
            if (nx->requires_grad) tensor_axpy(dx, 1.0, nx->grad);
            if (ng->requires_grad) tensor_axpy(dg, 1.0, ng->grad);
            if (nb->requires_grad) tensor_axpy(db, 1.0, nb->grad);
        });
    })};
}

Var Graph::gelu(Var x) {
    const Tensor& xv = val(x);
    Tensor y = Tensor::zeros(xv.shape(), xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        kern::gelu_fwd<S>(xv.data<S>().data(), y.data<S>().data(), xv.numel());
    });
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx](Node& nd) {
        if (!nx->requires_grad) return;
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            kern::gelu_bwd<S>(nx->value.data<S>().data(), nd.grad.data<S>().data(),
                              nx->grad.data<S>().data(), nd.value.numel());
        });
    })};
}

Var Graph::softplus(Var x) {
    const Tensor& xv = val(x);
    Tensor y = Tensor::zeros(xv.shape(), xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        kern::softplus_fwd<S>(xv.data<S>().data(), y.data<S>().data(), xv.numel());
    });
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx](Node& nd) {
        if (!nx->requires_grad) return;
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            kern::softplus_bwd<S>(nx->value.data<S>().data(), nd.grad.data<S>().data(),
                                  nx->grad.data<S>().data(), nd.value.numel());
        });
    })};
}

Var Graph::clamp(Var x, double lo, double hi) {
    const Tensor& xv = val(x);
    Tensor y = Tensor::zeros(xv.shape(), xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto xs = xv.data<S>();
        auto ys = y.data<S>();
        S l = static_cast<S>(lo), h = static_cast<S>(hi);
        for (size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] < l ? l : (xs[i] > h ? h : xs[i]);
    });
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx, lo, hi](Node& nd) {
        if (!nx->requires_grad) return;
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            auto xs = nx->value.data<S>();
            auto gs = nd.grad.data<S>();
            auto dx = nx->grad.data<S>();
            S l = static_cast<S>(lo), h = static_cast<S>(hi);
            for (size_t i = 0; i < xs.size(); ++i) {
                if (xs[i] > l && xs[i] < h) dx[i] += gs[i];
            }
        });
    })};
}

Var Graph::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    check_same_dtype(av, bv, "add");
    check(av.shape() == bv.shape(), ErrorKind::Config,
          "add: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    Tensor y = av.clone();
    tensor_axpy(bv, 1.0, y);
    Node* na = a.node;
    Node* nb = b.node;
    return Var{make_node(std::move(y), {na, nb}, [na, nb](Node& nd) {
        if (na->requires_grad) tensor_axpy(nd.grad, 1.0, na->grad);
        if (nb->requires_grad) tensor_axpy(nd.grad, 1.0, nb->grad);
    })};
}

Var Graph::scale(Var x, double s) {
    const Tensor& xv = val(x);
    Tensor y = Tensor::zeros(xv.shape(), xv.dtype());
    tensor_axpy(xv, s, y);
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx, s](Node& nd) {
        if (nx->requires_grad) tensor_axpy(nd.grad, s, nx->grad);
    })};
}

Var Graph::broadcast_channel(Var bias, int64_t n, int64_t h, int64_t w) {
    const Tensor& bv = val(bias);
    check(bv.rank() == 1, ErrorKind::Config, "broadcast_channel expects a (C) vector");
    int64_t c = bv.dim(0);
    Tensor y = Tensor::zeros({n, c, h, w}, bv.dtype());
    dtype_dispatch(bv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto bs = bv.data<S>();
        auto ys = y.data<S>();
        int64_t hw = h * w;
        for (int64_t nn = 0; nn < n; ++nn) {
            for (int64_t cc = 0; cc < c; ++cc) {
                S v = bs[static_cast<size_t>(cc)];
                S* row = ys.data() + (nn * c + cc) * hw;
                for (int64_t p = 0; p < hw; ++p) row[p] = v;
            }
        }
    });
    Node* nb = bias.node;
    return Var{make_node(std::move(y), {nb}, [nb, n, c, h, w](Node& nd) {
        if (!nb->requires_grad) return;
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            auto gs = nd.grad.data<S>();
            auto db = nb->grad.data<S>();
            int64_t hw = h * w;
            for (int64_t nn = 0; nn < n; ++nn) {
                for (int64_t cc = 0; cc < c; ++cc) {
                    const S* row = gs.data() + (nn * c + cc) * hw;
                    S s = S(0);
                    for (int64_t p = 0; p < hw; ++p) s += row[p];
                    db[static_cast<size_t>(cc)] += s;
                }
            }
        });
    })};
}

Var Graph::concat_c(const std::vector<Var>& xs) {
    check(!xs.empty(), ErrorKind::Config, "concat_c: empty input list");
    const Tensor& first = val(xs[0]);
    check(first.rank() == 4, ErrorKind::Config, "concat_c expects NCHW");
    int64_t n = first.dim(0), h = first.dim(2), w = first.dim(3);
    int64_t ctot = 0;
    for (const Var& x : xs) {
        const Tensor& xv = val(x);
        check_same_dtype(first, xv, "concat_c");
        check(xv.rank() == 4 && xv.dim(0) == n && xv.dim(2) == h && xv.dim(3) == w,
              ErrorKind::Config, "concat_c: incompatible shape " + shape_str(xv.shape()));
        ctot += xv.dim(1);
    }
    Tensor y = Tensor::zeros({n, ctot, h, w}, first.dtype());
    int64_t hw = h * w;
    dtype_dispatch(first.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto ys = y.data<S>();
        int64_t c0 = 0;
        for (const Var& x : xs) {
            const Tensor& xv = val(x);
            auto xd = xv.data<S>();
            int64_t ci = xv.dim(1);
            for (int64_t nn = 0; nn < n; ++nn) {
                const S* src = xd.data() + nn * ci * hw;
                S* dst = ys.data() + (nn * ctot + c0) * hw;
                for (int64_t i = 0; i < ci * hw; ++i) dst[i] = src[i];
            }
            c0 += ci;
        }
    });
    std::vector<Node*> parents;
    std::vector<int64_t> widths;
    for (const Var& x : xs) {
        parents.push_back(x.node);
        widths.push_back(val(x).dim(1));
    }
    return Var{make_node(std::move(y), parents, [parents, widths, n, hw, ctot](Node& nd) {
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            auto gs = nd.grad.data<S>();
            int64_t c0 = 0;
            for (size_t k = 0; k < parents.size(); ++k) {
                Node* p = parents[k];
                int64_t ci = widths[k];
                if (p->requires_grad) {
                    auto pg = p->grad.data<S>();
                    for (int64_t nn = 0; nn < n; ++nn) {
                        const S* src = gs.data() + (nn * ctot + c0) * hw;
                        S* dst = pg.data() + nn * ci * hw;
                        for (int64_t i = 0; i < ci * hw; ++i) dst[i] += src[i];
                    }
                }
                c0 += ci;
            }
        });
    })};
}

Var Graph::slice_c(Var x, int64_t c0, int64_t c1) {
    const Tensor& xv = val(x);
    check(xv.rank() == 4, ErrorKind::Config, "slice_c expects NCHW");
    int64_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    check(c0 >= 0 && c1 <= c && c0 < c1, ErrorKind::Config, "slice_c: bad channel range");
    int64_t cs = c1 - c0, hw = h * w;
    Tensor y = Tensor::zeros({n, cs, h, w}, xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto xd = xv.data<S>();
        auto ys = y.data<S>();
        for (int64_t nn = 0; nn < n; ++nn) {
            const S* src = xd.data() + (nn * c + c0) * hw;
            S* dst = ys.data() + nn * cs * hw;
            for (int64_t i = 0; i < cs * hw; ++i) dst[i] = src[i];
        }
    });
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx, n, c, c0, cs, hw](Node& nd) {
        if (!nx->requires_grad) return;
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            auto gs = nd.grad.data<S>();
            auto dx = nx->grad.data<S>();
            for (int64_t nn = 0; nn < n; ++nn) {
                const S* src = gs.data() + nn * cs * hw;
                S* dst = dx.data() + (nn * c + c0) * hw;
                for (int64_t i = 0; i < cs * hw; ++i) dst[i] += src[i];
            }
        });
    })};
}

Var Graph::sum_all(Var x) {
    const Tensor& xv = val(x);
    double s = 0.0;
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        for (S v : xv.data<S>()) s += static_cast<double>(v);
    });
    Tensor y = Tensor::scalar(s, xv.dtype());
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx](Node& nd) {
        if (!nx->requires_grad) return;
        double g = nd.grad.at(0);
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            auto dx = nx->grad.data<S>();
            S gv = static_cast<S>(g);
            for (auto& v : dx) v += gv;
        });
    })};
}

Var Graph::mse(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    check_same_dtype(av, bv, "mse");
    check(av.shape() == bv.shape(), ErrorKind::Config,
          "mse: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    double s = 0.0;
    dtype_dispatch(av.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto as = av.data<S>();
        auto bs = bv.data<S>();
        for (size_t i = 0; i < as.size(); ++i) {
            double d = static_cast<double>(as[i]) - static_cast<double>(bs[i]);
            s += d * d;
        }
    });
    double inv_n = 1.0 / static_cast<double>(av.numel());
    Tensor y = Tensor::scalar(s * inv_n, av.dtype());
    Node* na = a.node;
    Node* nb = b.node;
    return Var{make_node(std::move(y), {na, nb}, [na, nb, inv_n](Node& nd) {
        double g = nd.grad.at(0);
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            auto as = na->value.data<S>();
            auto bs = nb->value.data<S>();
            double c = 2.0 * g * inv_n;
            if (na->requires_grad) {
                auto da = na->grad.data<S>();
                for (size_t i = 0; i < as.size(); ++i) {
                    da[i] += static_cast<S>(c * (static_cast<double>(as[i]) -
                                                 static_cast<double>(bs[i])));
                }
            }
            if (nb->requires_grad) {
                auto db = nb->grad.data<S>();
                for (size_t i = 0; i < as.size(); ++i) {
                    db[i] -= static_cast<S>(c * (static_cast<double>(as[i]) -
                                                 static_cast<double>(bs[i])));
                }
            }
        });
    })};
}

Var Graph::ste_round(Var x) {
    const Tensor& xv = val(x);
    Tensor y = Tensor::zeros(xv.shape(), xv.dtype());
    dtype_dispatch(xv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        auto xs = xv.data<S>();
        auto ys = y.data<S>();
        for (size_t i = 0; i < xs.size(); ++i) {
            ys[i] = static_cast<S>(detmath::round_half_away(static_cast<double>(xs[i])));
        }
    });
    Node* nx = x.node;
    return Var{make_node(std::move(y), {nx}, [nx](Node& nd) {
        if (nx->requires_grad) tensor_axpy(nd.grad, 1.0, nx->grad); // straight-through
    })};
}

Var Graph::rate_bits(Var z, Var mu_hat, Var sigma_hat, double p_min) {
    const Tensor& zv = val(z);
    const Tensor& mv = val(mu_hat);
    const Tensor& sv = val(sigma_hat);
    check_same_dtype(zv, mv, "rate_bits");
    check_same_dtype(zv, sv, "rate_bits");
    check(zv.shape() == mv.shape() && zv.shape() == sv.shape(), ErrorKind::Config,
          "rate_bits: shape mismatch");
    Tensor y = Tensor::zeros(zv.shape(), zv.dtype());
    dtype_dispatch(zv.dtype(), [&](auto tag) {
        using S = decltype(tag);
        kern::rate_bits_fwd<S>(zv.data<S>().data(), mv.data<S>().data(), sv.data<S>().data(),
                               y.data<S>().data(), zv.numel(), p_min);
    });
    Node* nz = z.node;
    Node* nm = mu_hat.node;
    Node* ns = sigma_hat.node;
    return Var{make_node(std::move(y), {nz, nm, ns}, [nz, nm, ns, p_min](Node& nd) {
        dtype_dispatch(nd.value.dtype(), [&](auto tag) {
            using S = decltype(tag);
            kern::rate_bits_bwd<S>(nz->value.data<S>().data(), nm->value.data<S>().data(),
                                   ns->value.data<S>().data(), nd.grad.data<S>().data(),
                                   nz->requires_grad ? nz->grad.data<S>().data() : nullptr,
                                   nm->requires_grad ? nm->grad.data<S>().data() : nullptr,
                                   ns->requires_grad ? ns->grad.data<S>().data() : nullptr,
                                   nd.value.numel(), p_min);
        });
    })};
}

} // namespace hvc
