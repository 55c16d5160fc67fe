#pragma once

#include <cstddef>

// 3x3 stride-2 pad-1 convolution kernels, NCHW layout. The parallel variants
// split work over loop dimensions whose outputs are disjoint and keep every
// per-output accumulation in a fixed serial order, so results are bit-identical
// to the serial reference for any thread count. The serial namespace is the
// plain-loop reference used by the equivalence tests and the benchmark.

namespace tailforge::nn::kern {

constexpr int kKernelSize = 3;
constexpr int kStride = 2;
constexpr int kPad = 1;

constexpr int conv_out_dim(int in_dim) { return (in_dim + 2 * kPad - kKernelSize) / kStride + 1; }

namespace serial {

template <typename T>
void conv2d_forward(const T* in, int b, int ic, int ih, int iw,
                    const T* kernels, const T* bias, int oc, T* out) {
    const int oh = conv_out_dim(ih);
    const int ow = conv_out_dim(iw);
    for (int n = 0; n < b; ++n) {
        for (int o = 0; o < oc; ++o) {
            T* dst = out + (static_cast<std::size_t>(n) * oc + o) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = bias[o];
                    for (int c = 0; c < ic; ++c) {
                        const T* src = in + (static_cast<std::size_t>(n) * ic + c) * ih * iw;
                        const T* k = kernels + ((static_cast<std::size_t>(o) * ic + c) * kKernelSize) * kKernelSize;
                        for (int ky = 0; ky < kKernelSize; ++ky) {
                            int iy = oy * kStride - kPad + ky;
                            if (iy < 0 || iy >= ih) continue;
                            for (int kx = 0; kx < kKernelSize; ++kx) {
                                int ix = ox * kStride - kPad + kx;
                                if (ix < 0 || ix >= iw) continue;
                                acc += src[iy * iw + ix] * k[ky * kKernelSize + kx];
                            }
                        }
                    }
                    dst[oy * ow + ox] = acc;
                }
            }
        }
    }
}

// Gradients w.r.t. kernels and bias. Accumulation runs over batch and output
// positions in index order for each output channel.
template <typename T>
void conv2d_backward_params(const T* in, int b, int ic, int ih, int iw,
                            const T* dout, int oc, T* dkernels, T* dbias) {
    const int oh = conv_out_dim(ih);
    const int ow = conv_out_dim(iw);
    for (int o = 0; o < oc; ++o) {
        T db = T(0);
        T* dk_base = dkernels + (static_cast<std::size_t>(o) * ic) * kKernelSize * kKernelSize;
        for (int n = 0; n < b; ++n) {
            const T* g = dout + (static_cast<std::size_t>(n) * oc + o) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    T gv = g[oy * ow + ox];
                    if (gv == T(0)) continue;
                    db += gv;
                    for (int c = 0; c < ic; ++c) {
                        const T* src = in + (static_cast<std::size_t>(n) * ic + c) * ih * iw;
                        T* dk = dk_base + (static_cast<std::size_t>(c) * kKernelSize) * kKernelSize;
                        for (int ky = 0; ky < kKernelSize; ++ky) {
                            int iy = oy * kStride - kPad + ky;
                            if (iy < 0 || iy >= ih) continue;
                            for (int kx = 0; kx < kKernelSize; ++kx) {
                                int ix = ox * kStride - kPad + kx;
                                if (ix < 0 || ix >= iw) continue;
                                dk[ky * kKernelSize + kx] += gv * src[iy * iw + ix];
                            }
                        }
                    }
                }
            }
        }
        dbias[o] = db;
    }
}

// Gradient w.r.t. the layer input (gather form, no atomics).
template <typename T>
void conv2d_backward_input(const T* dout, int b, int oc, int ih, int iw,
                           const T* kernels, int ic, T* din) {
    const int oh = conv_out_dim(ih);
    const int ow = conv_out_dim(iw);
    for (int n = 0; n < b; ++n) {
        for (int c = 0; c < ic; ++c) {
            T* dst = din + (static_cast<std::size_t>(n) * ic + c) * ih * iw;
            for (int iy = 0; iy < ih; ++iy) {
                for (int ix = 0; ix < iw; ++ix) {
                    T acc = T(0);
                    for (int ky = 0; ky < kKernelSize; ++ky) {
                        int ty = iy + kPad - ky;
                        if (ty < 0 || ty % kStride != 0) continue;
                        int oy = ty / kStride;
                        if (oy >= oh) continue;
                        for (int kx = 0; kx < kKernelSize; ++kx) {
                            int tx = ix + kPad - kx;
                            if (tx < 0 || tx % kStride != 0) continue;
                            int ox = tx / kStride;
                            if (ox >= ow) continue;
                            for (int o = 0; o < oc; ++o) {
                                const T* g = dout + (static_cast<std::size_t>(n) * oc + o) * oh * ow;
                                const T* k = kernels + ((static_cast<std::size_t>(o) * ic + c) * kKernelSize) * kKernelSize;
                                acc += g[oy * ow + ox] * k[ky * kKernelSize + kx];
                            }
                        }
                    }
                    dst[iy * iw + ix] = acc;
                }
            }
        }
    }
}

}  // namespace serial

template <typename T>
void conv2d_forward(const T* in, int b, int ic, int ih, int iw,
                    const T* kernels, const T* bias, int oc, T* out) {
    const int oh = conv_out_dim(ih);
    const int ow = conv_out_dim(iw);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < b; ++n) {
        serial::conv2d_forward(in + static_cast<std::size_t>(n) * ic * ih * iw, 1, ic, ih, iw,
                               kernels, bias, oc, out + static_cast<std::size_t>(n) * oc * oh * ow);
    }
}

template <typename T>
void conv2d_backward_params(const T* in, int b, int ic, int ih, int iw,
                            const T* dout, int oc, T* dkernels, T* dbias) {
    const int oh = conv_out_dim(ih);
    const int ow = conv_out_dim(iw);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        T db = T(0);
        T* dk_base = dkernels + (static_cast<std::size_t>(o) * ic) * kKernelSize * kKernelSize;
        for (int n = 0; n < b; ++n) {
            const T* g = dout + (static_cast<std::size_t>(n) * oc + o) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    T gv = g[oy * ow + ox];
                    if (gv == T(0)) continue;
                    db += gv;
                    for (int c = 0; c < ic; ++c) {
                        const T* src = in + (static_cast<std::size_t>(n) * ic + c) * ih * iw;
                        T* dk = dk_base + (static_cast<std::size_t>(c) * kKernelSize) * kKernelSize;
                        for (int ky = 0; ky < kKernelSize; ++ky) {
                            int iy = oy * kStride - kPad + ky;
                            if (iy < 0 || iy >= ih) continue;
                            for (int kx = 0; kx < kKernelSize; ++kx) {
                                int ix = ox * kStride - kPad + kx;
                                if (ix < 0 || ix >= iw) continue;
                                dk[ky * kKernelSize + kx] += gv * src[iy * iw + ix];
                            }
                        }
                    }
                }
            }
        }
        dbias[o] = db;
    }
}

template <typename T>
void conv2d_backward_input(const T* dout, int b, int oc, int ih, int iw,
                           const T* kernels, int ic, T* din) {
    const int oh = conv_out_dim(ih);
    const int ow = conv_out_dim(iw);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < b; ++n) {
        serial::conv2d_backward_input(dout + static_cast<std::size_t>(n) * oc * oh * ow, 1, oc, ih, iw,
                                      kernels, ic, din + static_cast<std::size_t>(n) * ic * ih * iw);
    }
}

}  // namespace tailforge::nn::kern
