#pragma once

#include <cstdint>
#include <vector>

#include "hypercloud/tensor.hpp"

namespace hypercloud {

// Layer kernels, forward and backward. All accumulation is in double.

// Valid (no-pad) 1D convolution: {L, Cin} -> {L-k+1, Cout}.
Tensor conv1d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);
void conv1d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                     Tensor& grad_in, Tensor& grad_kernel, Tensor& grad_bias);

// Same-padded (zero fill) 2D convolution with an odd square kernel:
// {H, W, Cin} -> {H, W, Cout}.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);
void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                     Tensor& grad_in, Tensor& grad_kernel, Tensor& grad_bias);

// Non-overlapping window-2 max pooling; trailing odd elements dropped.
// argmax records the flat input index of each winner for the backward pass.
Tensor maxpool1d_forward(const Tensor& input, std::vector<size_t>& argmax);
Tensor maxpool2d_forward(const Tensor& input, std::vector<size_t>& argmax);
Tensor maxpool_backward(const Tensor& input_like, const Tensor& grad_out,
                        const std::vector<size_t>& argmax);

// {H, W, C} -> {2H, 2W, C}, each pixel replicated into a 2x2 block.
Tensor upsample_nearest_forward(const Tensor& input);
Tensor upsample_nearest_backward(const Tensor& grad_out);

// Concatenation along the trailing (channel) axis.
Tensor concat_forward(const Tensor& a, const Tensor& b);
void concat_backward(const Tensor& grad_out, Tensor& grad_a, Tensor& grad_b);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& output, const Tensor& grad_out);

// Dense over the flattened input: {F} (any shape with F elements) -> {K}.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                    Tensor& grad_in, Tensor& grad_weights, Tensor& grad_bias);

// Softmax over the trailing axis, max-subtracted for stability.
Tensor softmax_forward(const Tensor& input);
Tensor softmax_backward(const Tensor& output, const Tensor& grad_out);

// Dense + softmax in one call (the 1D model's classification head).
Tensor dense_softmax_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Mean over samples of -log p[target], p clamped to >= 1e-12. The trailing
// axis of probs is the class axis; targets has probs.size()/K entries.
double cross_entropy(const Tensor& probs, const std::vector<uint8_t>& targets);
// dL/dprobs for the loss above.
Tensor cross_entropy_grad(const Tensor& probs, const std::vector<uint8_t>& targets);

}  // namespace hypercloud
