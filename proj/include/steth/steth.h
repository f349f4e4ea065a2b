/*
 * C interface to the stethoscope signal chain, radio link simulator,
 * heart sound analysis and LAN streaming service.
 *
 * Objects are opaque handles created by steth_*_create / returned through
 * out-parameters and released with the matching *_destroy call. Every
 * fallible call returns a steth_status; on failure a human-readable
 * message for the calling thread is available from steth_last_error().
 */
#ifndef STETH_STETH_H_
#define STETH_STETH_H_

#include <signal.h>
#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define STETH_API __declspec(dllexport)
#else
#define STETH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum steth_status {
    STETH_OK = 0,
    STETH_ERR_INVALID_ARGUMENT = 2,
    STETH_ERR_FILTER_DESIGN = 3,
    STETH_ERR_IO = 4,
    STETH_ERR_NOT_FOUND = 5,
    STETH_ERR_UNSUPPORTED_FORMAT = 6,
    STETH_ERR_UNSUPPORTED_CHANNELS = 7,
    STETH_ERR_UNSUPPORTED_BIT_DEPTH = 8,
    STETH_ERR_MALFORMED_FILE = 9,
    STETH_ERR_DECODE = 10,
    STETH_ERR_ENCODE = 11,
    STETH_ERR_INSUFFICIENT_DATA = 12,
    STETH_ERR_NETWORK = 13,
    STETH_ERR_PROTOCOL = 14,
    STETH_ERR_REJECTED = 15,
    STETH_ERR_INTERNAL = 16
} steth_status;

STETH_API const char* steth_status_string(steth_status status);

/* Message for the most recent failure on this thread ("" if none). */
STETH_API const char* steth_last_error(void);

/* ---- audio buffers and WAV files ---------------------------------- */

typedef struct steth_audio steth_audio;

STETH_API steth_status steth_audio_create(uint32_t sample_rate, const double* samples,
                                          size_t count, steth_audio** out);
STETH_API void steth_audio_destroy(steth_audio* audio);
STETH_API uint32_t steth_audio_sample_rate(const steth_audio* audio);
STETH_API size_t steth_audio_length(const steth_audio* audio);
/* Valid until the buffer is destroyed. */
STETH_API const double* steth_audio_samples(const steth_audio* audio);

/* 16-bit mono PCM; full_scale volts maps to the 16-bit rails. */
STETH_API steth_status steth_wav_read(const char* path, double full_scale, steth_audio** out);
STETH_API steth_status steth_wav_write(const char* path, const steth_audio* audio,
                                       double full_scale);

/* ---- synthetic test signals ---------------------------------------- */

typedef enum steth_synth_kind {
    STETH_SYNTH_HEART = 0,
    STETH_SYNTH_MURMUR = 1,
    STETH_SYNTH_LUNG = 2
} steth_synth_kind;

typedef struct steth_synth_options {
    steth_synth_kind kind;
    double bpm;
    uint64_t seed;
    double duration_s;
    uint32_t sample_rate;
    double amplitude; /* volts at the microphone; 0 = default for the kind */
} steth_synth_options;

STETH_API void steth_synth_options_default(steth_synth_options* opts);
STETH_API steth_status steth_synthesize(const steth_synth_options* opts, steth_audio** out);

/* ---- transmitter front end ----------------------------------------- */

typedef struct steth_chain_config {
    double preamp_gain;
    int cutoff_hz; /* 100 or 1000 */
    double filter_gain;
    double volume; /* [0, 1] */
    double power_gain;
    double full_scale; /* volts */
    uint32_t sample_rate;
    double dc_block_hz;
} steth_chain_config;

STETH_API void steth_chain_config_default(steth_chain_config* cfg);

typedef struct steth_process_report {
    double preamp_gain;
    double filter_dc_gain;
    double filter_gain_at_cutoff;
    double power_gain_effective;
    double nominal_gain;
    double input_rms;
    double output_rms;
    uint64_t clipped_samples;
} steth_process_report;

/* Transmit chain then DAC. `report` may be NULL. */
STETH_API steth_status steth_process(const steth_audio* input, const steth_chain_config* cfg,
                                     steth_audio** output, steth_process_report* report);

/* ---- radio link simulation ----------------------------------------- */

typedef enum steth_concealment {
    STETH_CONCEAL_ZERO = 0,
    STETH_CONCEAL_REPEAT = 1
} steth_concealment;

typedef struct steth_link_config {
    double bitrate;
    double loss_prob;
    double jitter_max_s;
    uint32_t overhead_bytes;
    uint64_t seed;
    double depth_s;
    steth_concealment concealment;
} steth_link_config;

STETH_API void steth_link_config_default(steth_link_config* cfg);

typedef struct steth_link_stats {
    uint64_t sent;
    uint64_t delivered;
    uint64_t dropped;
    uint64_t late;
    uint64_t concealed_samples;
    double utilization;
    double latency_p50_s;
    double latency_p95_s;
    double latency_p99_s;
    double latency_max_s;
} steth_link_stats;

/* chain -> packets -> link -> jitter buffer -> DAC. `stats` may be NULL. */
STETH_API steth_status steth_simulate(const steth_audio* input, const steth_chain_config* chain,
                                      const steth_link_config* link, steth_audio** output,
                                      steth_link_stats* stats);

/* ---- heart sound analysis ------------------------------------------ */

typedef enum steth_heart_sound { STETH_S1 = 1, STETH_S2 = 2 } steth_heart_sound;

typedef struct steth_heart_event {
    double time_s;
    steth_heart_sound label;
    double energy_s1_band;
    double energy_s2_band;
} steth_heart_event;

typedef struct steth_events steth_events;

STETH_API steth_status steth_detect_heart_sounds(const steth_audio* audio, steth_events** out);
STETH_API void steth_events_destroy(steth_events* events);
STETH_API size_t steth_events_count(const steth_events* events);
STETH_API steth_status steth_events_get(const steth_events* events, size_t index,
                                        steth_heart_event* out);
/* STETH_ERR_INSUFFICIENT_DATA with fewer than two S1 events. */
STETH_API steth_status steth_estimate_heart_rate(const steth_events* events, double* bpm);

/* ---- LAN streaming service ----------------------------------------- */

typedef struct steth_server steth_server;

typedef struct steth_server_options {
    const char* bind_host;
    uint16_t stream_port;  /* 0 = ephemeral */
    uint16_t control_port; /* 0 = ephemeral */
    size_t queue_limit;
    int send_buffer_bytes; /* 0 = system default */
} steth_server_options;

typedef struct steth_server_stats {
    uint64_t packets_broadcast;
    uint64_t sessions_accepted;
    uint64_t sessions_live;
    uint64_t sessions_dropped_slow;
    uint64_t sessions_failed;
    uint64_t commands_applied;
} steth_server_stats;

STETH_API void steth_server_options_default(steth_server_options* opts);
STETH_API steth_status steth_server_create(const steth_server_options* opts,
                                           const steth_chain_config* chain,
                                           steth_server** out);
/* Shuts down (draining listeners) and frees the server. */
STETH_API void steth_server_destroy(steth_server* server);
STETH_API uint16_t steth_server_stream_port(const steth_server* server);
STETH_API uint16_t steth_server_control_port(const steth_server* server);
/* Returns 1 once `count` listeners are connected, 0 on timeout. */
STETH_API int steth_server_wait_listeners(steth_server* server, size_t count, int timeout_ms);
/* Blocks while streaming `source`; speed <= 0 streams without pacing.
 * `cancel` may be NULL; a nonzero value stops the stream early. */
STETH_API steth_status steth_server_stream(steth_server* server, const steth_audio* source,
                                           double speed, const volatile sig_atomic_t* cancel);
STETH_API void steth_server_shutdown(steth_server* server);
STETH_API void steth_server_get_stats(const steth_server* server, steth_server_stats* out);

typedef enum steth_stream_end {
    STETH_END_OF_STREAM = 0,
    STETH_END_CONNECTION_RESET = 1,
    STETH_END_PROTOCOL_ERROR = 2,
    STETH_END_CANCELLED = 3
} steth_stream_end;

typedef struct steth_listen_options {
    const char* host;
    uint16_t port;
    uint32_t sample_rate;
    double full_scale;
    double depth_s;
    steth_concealment concealment;
    int receive_buffer_bytes; /* 0 = system default */
} steth_listen_options;

typedef struct steth_listen_result {
    steth_stream_end end;
    uint64_t packets;
    uint64_t bytes;
    uint64_t late;
    uint64_t concealed_samples;
    uint8_t last_flags;
} steth_listen_result;

STETH_API void steth_listen_options_default(steth_listen_options* opts);
/* Receives until the server closes or `cancel` turns nonzero. The
 * reconstructed audio is returned through `recording` (may be NULL).
 * Returns STETH_ERR_NETWORK when the server cannot be reached and
 * STETH_ERR_PROTOCOL when the stream was malformed; `result` is filled in
 * whenever a connection was made. */
STETH_API steth_status steth_listen(const steth_listen_options* opts,
                                    const volatile sig_atomic_t* cancel,
                                    steth_audio** recording, steth_listen_result* result);

/* Sends one control line and copies the reply (NUL terminated) into
 * `reply`. Returns STETH_ERR_REJECTED when the server answered ERR. */
STETH_API steth_status steth_control(const char* host, uint16_t port, const char* line,
                                     char* reply, size_t reply_capacity);

#ifdef __cplusplus
}
#endif

#endif
