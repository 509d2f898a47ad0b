#ifndef ASYMGAN_IMAGE_IO_HPP
#define ASYMGAN_IMAGE_IO_HPP

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace asymgan {

// Images live as 3xHxW float tensors in [-1,1]; on disk as 8-bit RGB PNG.
// byte -> float is v/127.5 - 1, float -> byte is round((v+1)*127.5) clamped.

torch::Tensor load_png(const std::filesystem::path& path);
void save_png(const torch::Tensor& chw, const std::filesystem::path& path);

std::vector<std::uint8_t> to_rgb8(const torch::Tensor& chw);
torch::Tensor from_rgb8(const std::vector<std::uint8_t>& rgb, std::int64_t h,
                        std::int64_t w);

/// zlib-compressed byte size of the raw RGB payload; the data module's
/// information-content proxy.
std::size_t compressed_size(const std::vector<std::uint8_t>& bytes);

/// Tile a list of equally sized 3xHxW images into one grid image.
torch::Tensor make_grid(const std::vector<torch::Tensor>& images,
                        std::int64_t columns, std::int64_t padding = 2);

}  // namespace asymgan

#endif
