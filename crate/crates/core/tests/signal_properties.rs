use proptest::prelude::*;

use mirkit::audio_io::{decode_wav, encode_wav, load_wav, save_wav, AudioBuffer, BitDepth};
use mirkit::spectral::{
    frame_count, hz_to_mel, istft, magnitude, mel_to_hz, stft, to_decibels, DbOptions, Power, RealMatrix, Scale,
};

fn signal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn float_wav_round_trip_is_exact(x in prop::collection::vec(-1.0f32..1.0, 1..2000), stereo in any::<bool>()) {
        let channels = if stereo { 2 } else { 1 };
        let mut x = x;
        x.truncate(x.len() / channels as usize * channels as usize);
        prop_assume!(!x.is_empty());
        let buf = AudioBuffer::new(x, 16000, channels).unwrap();
        let bytes = encode_wav(&buf, BitDepth::Float32).unwrap();
        let back: AudioBuffer<f32> = decode_wav(&bytes, "mem.wav".as_ref()).unwrap();
        prop_assert_eq!(back, buf);
    }

    #[test]
    fn pcm16_round_trip_within_one_step(x in prop::collection::vec(-1.0f32..1.0, 1..2000)) {
        let buf = AudioBuffer::mono(x.clone(), 22050).unwrap();
        let bytes = encode_wav(&buf, BitDepth::Int16).unwrap();
        let back: AudioBuffer<f32> = decode_wav(&bytes, "mem.wav".as_ref()).unwrap();
        for (a, b) in x.iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32767.0, "{} vs {}", a, b);
        }
    }

    #[test]
    fn frame_count_is_ceiling(len in 1usize..100_000, hop in 1usize..4096) {
        prop_assert_eq!(frame_count(len, hop), (len + hop - 1) / hop);
    }

    #[test]
    fn stft_istft_round_trip(x in signal(3000), which in 0usize..3) {
        let n_fft = [64usize, 128, 256][which];
        let buf = AudioBuffer::mono(x.clone(), 8000).unwrap();
        let spec = stft(&buf, n_fft, n_fft / 4).unwrap();
        prop_assert_eq!(spec.shape(), (n_fft / 2 + 1, frame_count(x.len(), n_fft / 4)));
        let y = istft(&spec, x.len()).unwrap();
        for (a, b) in x.iter().zip(y.samples()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mel_round_trip_and_monotone(f in 0.0f64..20_000.0, g in 0.0f64..20_000.0) {
        let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
        prop_assert!((back - f).abs() <= 1e-9 * f.max(1.0));
        if f < g {
            prop_assert!(hz_to_mel(f).unwrap() < hz_to_mel(g).unwrap());
        }
    }

    #[test]
    fn decibels_are_monotone(values in prop::collection::vec(1e-12f64..1e3, 2..64)) {
        let m = RealMatrix {
            data: ndarray::Array2::from_shape_vec((values.len(), 1), values.clone()).unwrap(),
            scale: Scale::Power,
            frequencies: vec![0.0; values.len()],
            hop_length: 1,
            sample_rate: 1,
        };
        let db = to_decibels(&m, &DbOptions::power()).unwrap();
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(db.data[[i, 0]] <= db.data[[j, 0]]);
                }
            }
        }
    }
}

#[test]
fn wav_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone.wav");
    let x: Vec<f32> = (0..4410).map(|t| (t as f32 * 0.05).sin() * 0.3).collect();
    let buf = AudioBuffer::mono(x, 44100).unwrap();
    save_wav(&buf, &path, BitDepth::Float32).unwrap();
    let back: AudioBuffer<f32> = load_wav(&path).unwrap();
    assert_eq!(back, buf);
}

/// Frame energies summed over the one-sided spectrum agree with the
/// windowed time-domain energy (Parseval), to within 1%.
#[test]
fn parseval_energy() {
    let n_fft = 512;
    let hop = 128;
    let mut rng = mirkit::rng::Rng::new(3);
    let x: Vec<f64> = (0..8000).map(|_| rng.gaussian()).collect();
    let buf = AudioBuffer::mono(x.clone(), 8000).unwrap();
    let spec = stft(&buf, n_fft, hop).unwrap();
    let power = magnitude(&spec, Power::Power);
    let window = mirkit::spectral::hann_window::<f64>(n_fft);
    let pad = n_fft / 2;
    // reflect padding, rebuilt here independently
    let padded: Vec<f64> = (0..x.len() + 2 * pad)
        .map(|i| {
            let j = i as isize - pad as isize;
            let n = x.len() as isize;
            let k = if j < 0 { -j } else if j >= n { 2 * (n - 1) - j } else { j };
            x[k as usize]
        })
        .collect();
    for frame in [3usize, 20, 40] {
        let time: f64 = (0..n_fft).map(|i| (padded[frame * hop + i] * window[i]).powi(2)).sum();
        let col = power.data.column(frame);
        // one-sided spectrum: interior bins stand for two
        let freq: f64 = (0..col.len())
            .map(|k| if k == 0 || k == n_fft / 2 { col[k] } else { 2.0 * col[k] })
            .sum::<f64>()
            / n_fft as f64;
        assert!((time - freq).abs() / time < 0.01, "frame {frame}: {time} vs {freq}");
    }
}
