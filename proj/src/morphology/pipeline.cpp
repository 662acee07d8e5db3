#include <cctype>
#include <charconv>
#include <string>

#include "seedseg/error.hpp"
#include "seedseg/morphology.hpp"

namespace seedseg::morphology {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

bool parse_positive(std::string_view s, long long& out) {
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end && out >= 1;
}

PostEditOp parse_token(std::string_view token) {
    const auto bad = [&] { return ValidationError("unknown post-edit op '" + std::string(token) + "'"); };
    const auto colon = token.find(':');
    const auto name = token.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : token.substr(colon + 1);
    if (colon != std::string_view::npos && arg.empty())
        throw bad();

    PostEditOp op;
    if (name == "dilate" || name == "erode") {
        op.kind = name == "dilate" ? PostEditOp::Kind::dilate : PostEditOp::Kind::erode;
        long long n = 1;
        if (!arg.empty() && !parse_positive(arg, n))
            throw bad();
        if (n > 1000)
            throw bad();
        op.iterations = static_cast<int>(n);
        return op;
    }
    if (name == "islands") {
        op.kind = PostEditOp::Kind::islands;
        if (colon == std::string_view::npos || arg == "keep_largest") {
            op.islands = IslandPolicy::keep_largest();
            return op;
        }
        constexpr std::string_view prefix = "min_size=";
        long long k = 0;
        if (arg.starts_with(prefix) && parse_positive(arg.substr(prefix.size()), k)) {
            op.islands = IslandPolicy::at_least(static_cast<std::size_t>(k));
            return op;
        }
    }
    throw bad();
}

} // namespace

std::string PostEditOp::to_string() const {
    switch (kind) {
    case Kind::dilate:
        return "dilate:" + std::to_string(iterations);
    case Kind::erode:
        return "erode:" + std::to_string(iterations);
    case Kind::islands:
        break;
    }
    if (islands.kind == IslandPolicy::Kind::keep_largest)
        return "islands:keep_largest";
    return "islands:min_size=" + std::to_string(islands.min_size);
}

std::vector<PostEditOp> parse_pipeline(std::string_view text) {
    std::vector<PostEditOp> ops;
    if (trim(text).empty())
        return ops;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto token = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        ops.push_back(parse_token(token));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return ops;
}

LabelVolume apply_pipeline(const LabelVolume& mask, std::span<const PostEditOp> ops, Connectivity connectivity) {
    if (!mask.is_binary())
        throw DomainError("post-edit pipeline expects a binary {0,1} mask");
    LabelVolume cur = mask;
    for (const auto& op : ops) {
        switch (op.kind) {
        case PostEditOp::Kind::dilate:
            cur = dilate(cur, connectivity, op.iterations);
            break;
        case PostEditOp::Kind::erode:
            cur = erode(cur, connectivity, op.iterations);
            break;
        case PostEditOp::Kind::islands:
            cur = remove_islands(cur, connectivity, op.islands);
            break;
        }
    }
    return cur;
}

} // namespace seedseg::morphology
