#ifndef PISM_H
#define PISM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Samples per channel in one frame.
#define PISM_FRAME_LEN 960

// Number of band borders passed to the constructors.
#define PISM_NUM_BAND_BORDERS 12

// Output loudspeaker layout.
typedef enum PismLayout {
  PISM_LAYOUT_SURROUND5_1 = 0,
  PISM_LAYOUT_SURROUND5_1_4 = 1,
  PISM_LAYOUT_SURROUND7_1 = 2,
  PISM_LAYOUT_SURROUND7_1_4 = 3,
} PismLayout;

// Result of every fallible call.
typedef enum PismStatus {
  PISM_STATUS_OK = 0,
  PISM_STATUS_NULL_POINTER = 1,
  PISM_STATUS_INVALID_ARGUMENT = 2,
  PISM_STATUS_BUFFER_TOO_SMALL = 3,
  PISM_STATUS_CORRUPT_FRAME = 4,
  PISM_STATUS_INTERNAL = 5,
} PismStatus;

// How the encoder restores downmix energy lost to the dominant-pair model.
typedef enum PismCompensation {
  PISM_COMPENSATION_TOTAL_POWER = 0,
  PISM_COMPENSATION_DOMINANT_PAIR = 1,
} PismCompensation;

// Opaque decoder handle.
typedef struct PismDecoder PismDecoder;

// Opaque encoder handle.
typedef struct PismEncoder PismEncoder;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a NUL-terminated
// string, truncating if needed. Returns the full message length excluding the
// terminator, or 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t pism_last_error_message(char *buf, size_t len);

// Samples per channel in one frame.
size_t pism_frame_length(void);

// Decoder filterbank delay in samples.
size_t pism_decoder_latency(void);

// Side information rate in bit/s, or 0 for an unsupported object count.
uint64_t pism_side_info_bitrate(uint32_t num_objects);

// Size of one packed frame in bytes, or 0 for an unsupported configuration.
size_t pism_frame_bytes(uint32_t num_objects, uint32_t downmix_bits);

// Output channels of a layout, LFE included.
size_t pism_layout_channel_count(enum PismLayout layout);

// Creates an encoder for 2 to 4 objects.
//
// `band_borders` is null for the default partition or points to
// [`PISM_NUM_BAND_BORDERS`] values. `downmix_bits` is 16 or 24.
//
// # Safety
// `out` must be a valid pointer; `band_borders` must be null or readable.
enum PismStatus pism_encoder_new(uint32_t num_objects,
                                 uint32_t downmix_bits,
                                 enum PismCompensation compensation,
                                 const uint16_t *band_borders,
                                 struct PismEncoder **out);

// Releases an encoder. Null is ignored.
//
// # Safety
// `enc` must be null or a handle from [`pism_encoder_new`] not yet freed.
void pism_encoder_free(struct PismEncoder *enc);

// Encodes one frame into a packed frame of [`pism_frame_bytes`] bytes.
//
// `objects` holds one pointer per object to [`PISM_FRAME_LEN`] samples.
// `azimuth_deg` and `elevation_deg` hold one direction per object.
//
// # Safety
// All pointers must be valid for the sizes above; `out` for `out_len` bytes.
enum PismStatus pism_encoder_encode_frame(struct PismEncoder *enc,
                                          const float *const *objects,
                                          const float *azimuth_deg,
                                          const float *elevation_deg,
                                          uint8_t *out,
                                          size_t out_len,
                                          size_t *written);

// Creates a decoder. The stream parameters must match the encoder's.
//
// # Safety
// `out` must be a valid pointer; `band_borders` must be null or readable.
enum PismStatus pism_decoder_new(enum PismLayout layout,
                                 uint32_t num_objects,
                                 uint32_t downmix_bits,
                                 const uint16_t *band_borders,
                                 bool energy_correction,
                                 struct PismDecoder **out);

// Releases a decoder. Null is ignored.
//
// # Safety
// `dec` must be null or a handle from [`pism_decoder_new`] not yet freed.
void pism_decoder_free(struct PismDecoder *dec);

// Output channels of the decoder, or 0 for a null handle.
//
// # Safety
// `dec` must be null or a live handle.
size_t pism_decoder_channel_count(const struct PismDecoder *dec);

// Decodes one packed frame into `out`, channel-major: channel `c` occupies
// `out[c * PISM_FRAME_LEN ..]`. Output lags the encoder input by
// [`pism_decoder_latency`] samples.
//
// # Safety
// `frame` must be readable for `frame_len` bytes, `out` writable for `out_len` floats.
enum PismStatus pism_decoder_decode_frame(struct PismDecoder *dec,
                                          const uint8_t *frame,
                                          size_t frame_len,
                                          float *out,
                                          size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PISM_H */
