//! Raw video ingestion: YUV4MPEG2 streams and headerless I420 files.
//!
//! Only the luma plane of each frame is kept. Chroma payloads are consumed
//! from the reader and dropped without being buffered, so a stream can be
//! walked one frame at a time in constant memory.

use std::fmt;
use std::io::{self, BufRead, Read, Write};

use crate::error::{Error, Result};

const Y4M_SIGNATURE: &str = "YUV4MPEG2";
const FRAME_MARKER: &[u8] = b"FRAME";
// Header and frame lines are short; anything longer is not a Y4M stream.
const MAX_LINE: usize = 4096;
// Read payloads in bounded steps so a bogus W/H never triggers a huge
// allocation before the data actually shows up.
const READ_STEP: usize = 1 << 24;

/// One 8-bit luma plane, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlane {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl FramePlane {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::invalid("frame dimensions overflow"))?;
        if samples.len() != expected {
            return Err(Error::invalid(format!(
                "{width}x{height} plane needs {expected} samples, got {}",
                samples.len()
            )));
        }
        Ok(FramePlane {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }
}

/// Frames per second as a rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid(format!("frame rate {num}:{den} must be positive")));
        }
        Ok(FrameRate { num, den })
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Accepts `30`, `30:1`, `30000/1001` and decimal forms like `29.97`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::parse(format!("invalid frame rate `{s}`"));
        if let Some((n, d)) = s.split_once([':', '/']) {
            let num = n.trim().parse().map_err(|_| bad())?;
            let den = d.trim().parse().map_err(|_| bad())?;
            return Self::new(num, den);
        }
        if let Ok(num) = s.parse::<u32>() {
            return Self::new(num, 1);
        }
        let fps: f64 = s.parse().map_err(|_| bad())?;
        if !(fps.is_finite() && fps > 0.0 && fps < 1e6) {
            return Err(bad());
        }
        Self::new((fps * 1000.0).round() as u32, 1000)
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.num, self.den)
    }
}

/// A decoded segment: luma planes of uniform size plus timing.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSource {
    frames: Vec<FramePlane>,
    frame_rate: FrameRate,
}

impl SegmentSource {
    pub fn new(frames: Vec<FramePlane>, frame_rate: FrameRate) -> Result<Self> {
        if let Some(first) = frames.first() {
            let dims = (first.width, first.height);
            if let Some((i, f)) = frames
                .iter()
                .enumerate()
                .find(|(_, f)| (f.width, f.height) != dims)
            {
                return Err(Error::invalid(format!(
                    "frame {i} is {}x{} but frame 0 is {}x{}",
                    f.width, f.height, dims.0, dims.1
                )));
            }
        }
        Ok(SegmentSource { frames, frame_rate })
    }

    pub fn frames(&self) -> &[FramePlane] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<FramePlane> {
        self.frames
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Duration in seconds.
    pub fn segment_length(&self) -> f64 {
        self.frames.len() as f64 / self.frame_rate.as_f64()
    }

    pub fn dimensions(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }
}

/// Stream parameters taken from a Y4M header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub frame_rate: FrameRate,
}

impl Y4mHeader {
    fn frame_layout(&self) -> Result<FrameLayout> {
        FrameLayout::i420(self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy)]
struct FrameLayout {
    luma: usize,
    chroma: usize,
}

impl FrameLayout {
    fn i420(width: usize, height: usize) -> Result<Self> {
        let overflow = || Error::invalid(format!("frame size {width}x{height} overflows"));
        let luma = width.checked_mul(height).ok_or_else(overflow)?;
        let chroma = width
            .div_ceil(2)
            .checked_mul(height.div_ceil(2))
            .and_then(|c| c.checked_mul(2))
            .ok_or_else(overflow)?;
        luma.checked_add(chroma).ok_or_else(overflow)?;
        Ok(FrameLayout { luma, chroma })
    }

    fn total(&self) -> usize {
        self.luma + self.chroma
    }
}

/// Incremental Y4M reader yielding one luma plane per `FRAME` record.
pub struct Y4mReader<R> {
    inner: R,
    header: Y4mHeader,
    layout: FrameLayout,
    next_index: usize,
    done: bool,
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let line = read_line(&mut inner)?
            .ok_or_else(|| Error::parse("empty stream, expected YUV4MPEG2 header"))?;
        let header = parse_header(&line)?;
        let layout = header.frame_layout()?;
        Ok(Y4mReader {
            inner,
            header,
            layout,
            next_index: 0,
            done: false,
        })
    }

    pub fn header(&self) -> Y4mHeader {
        self.header
    }

    /// Reads the next frame, or `None` at a clean end of stream.
    pub fn next_frame(&mut self) -> Result<Option<FramePlane>> {
        if self.done {
            return Ok(None);
        }
        let index = self.next_index;
        let line = match read_line(&mut self.inner) {
            Ok(Some(line)) => line,
            Ok(None) => {
                self.done = true;
                return Ok(None);
            }
            Err(Error::Parse(detail)) => {
                self.done = true;
                return Err(Error::TruncatedInput {
                    frame: index,
                    detail,
                });
            }
            Err(e) => {
                self.done = true;
                return Err(e);
            }
        };
        if !line.starts_with(FRAME_MARKER)
            || !matches!(line.get(FRAME_MARKER.len()), None | Some(b' '))
        {
            self.done = true;
            return Err(Error::parse(format!(
                "expected FRAME marker before frame {index}"
            )));
        }

        let luma = read_exact_bounded(&mut self.inner, self.layout.luma);
        let luma = match luma {
            Ok(buf) if buf.len() == self.layout.luma => buf,
            Ok(buf) => {
                self.done = true;
                return Err(Error::TruncatedInput {
                    frame: index,
                    detail: format!(
                        "luma payload has {} of {} bytes",
                        buf.len(),
                        self.layout.luma
                    ),
                });
            }
            Err(e) => {
                self.done = true;
                return Err(e.into());
            }
        };
        let skipped = io::copy(
            &mut (&mut self.inner).take(self.layout.chroma as u64),
            &mut io::sink(),
        )?;
        if skipped != self.layout.chroma as u64 {
            self.done = true;
            return Err(Error::TruncatedInput {
                frame: index,
                detail: format!(
                    "chroma payload has {skipped} of {} bytes",
                    self.layout.chroma
                ),
            });
        }
        self.next_index += 1;
        FramePlane::new(self.header.width, self.header.height, luma).map(Some)
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<FramePlane>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Incremental reader for headerless I420 data.
pub struct RawYuvReader<R> {
    inner: R,
    width: usize,
    height: usize,
    layout: FrameLayout,
    next_index: usize,
    done: bool,
}

impl<R: Read> RawYuvReader<R> {
    pub fn new(inner: R, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "raw YUV dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(RawYuvReader {
            inner,
            width,
            height,
            layout: FrameLayout::i420(width, height)?,
            next_index: 0,
            done: false,
        })
    }

    pub fn next_frame(&mut self) -> Result<Option<FramePlane>> {
        if self.done {
            return Ok(None);
        }
        let index = self.next_index;
        let luma = read_exact_bounded(&mut self.inner, self.layout.luma)?;
        if luma.is_empty() {
            self.done = true;
            return Ok(None);
        }
        if luma.len() < self.layout.luma {
            self.done = true;
            return Err(Error::TruncatedInput {
                frame: index,
                detail: format!(
                    "trailing partial frame of {} bytes (frame size {})",
                    luma.len(),
                    self.layout.total()
                ),
            });
        }
        let skipped = io::copy(
            &mut (&mut self.inner).take(self.layout.chroma as u64),
            &mut io::sink(),
        )?;
        if skipped != self.layout.chroma as u64 {
            self.done = true;
            return Err(Error::TruncatedInput {
                frame: index,
                detail: format!(
                    "trailing partial frame of {} bytes (frame size {})",
                    self.layout.luma as u64 + skipped,
                    self.layout.total()
                ),
            });
        }
        self.next_index += 1;
        FramePlane::new(self.width, self.height, luma).map(Some)
    }
}

impl<R: Read> Iterator for RawYuvReader<R> {
    type Item = Result<FramePlane>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Parses a complete in-memory Y4M stream.
pub fn parse_y4m(stream: &[u8]) -> Result<SegmentSource> {
    let reader = Y4mReader::new(stream)?;
    let frame_rate = reader.header().frame_rate;
    let frames = reader.collect::<Result<Vec<_>>>()?;
    SegmentSource::new(frames, frame_rate)
}

/// Parses headerless I420 bytes; the stream must hold whole frames only.
pub fn parse_raw_yuv(
    stream: &[u8],
    width: usize,
    height: usize,
    frame_rate: FrameRate,
) -> Result<SegmentSource> {
    let frames = RawYuvReader::new(stream, width, height)?.collect::<Result<Vec<_>>>()?;
    SegmentSource::new(frames, frame_rate)
}

/// Writes a segment as 8-bit 4:2:0 Y4M with mid-grey chroma.
pub fn write_y4m<W: Write>(segment: &SegmentSource, mut out: W) -> Result<()> {
    let (width, height) = segment
        .dimensions()
        .ok_or_else(|| Error::invalid("cannot write an empty segment"))?;
    let fr = segment.frame_rate();
    writeln!(
        out,
        "{Y4M_SIGNATURE} W{width} H{height} F{}:{} Ip A1:1 C420jpeg",
        fr.num, fr.den
    )?;
    let chroma = vec![128u8; FrameLayout::i420(width, height)?.chroma];
    for frame in segment.frames() {
        out.write_all(b"FRAME\n")?;
        out.write_all(frame.samples())?;
        out.write_all(&chroma)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_header(line: &[u8]) -> Result<Y4mHeader> {
    let text =
        std::str::from_utf8(line).map_err(|_| Error::parse("Y4M header is not valid ASCII"))?;
    let mut tokens = text.split(' ').filter(|t| !t.is_empty());
    if tokens.next() != Some(Y4M_SIGNATURE) {
        return Err(Error::parse("missing YUV4MPEG2 signature"));
    }
    let mut width = None;
    let mut height = None;
    let mut frame_rate = None;
    for token in tokens {
        let (tag, value) = token.split_at(token.chars().next().map_or(0, char::len_utf8));
        match tag {
            "W" => width = Some(parse_dim(value, "width")?),
            "H" => height = Some(parse_dim(value, "height")?),
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| Error::parse(format!("malformed frame rate `{value}`")))?;
                let num = n
                    .parse()
                    .map_err(|_| Error::parse(format!("malformed frame rate `{value}`")))?;
                let den = d
                    .parse()
                    .map_err(|_| Error::parse(format!("malformed frame rate `{value}`")))?;
                frame_rate = Some(
                    FrameRate::new(num, den)
                        .map_err(|_| Error::parse(format!("frame rate `{value}` is not positive")))?,
                );
            }
            "C" => check_colorspace(value)?,
            // Interlacing, aspect ratio, and X- extensions do not affect luma layout.
            "I" | "A" | "X" => {}
            _ => return Err(Error::parse(format!("unknown Y4M header tag `{token}`"))),
        }
    }
    Ok(Y4mHeader {
        width: width.ok_or_else(|| Error::parse("Y4M header lacks W"))?,
        height: height.ok_or_else(|| Error::parse("Y4M header lacks H"))?,
        frame_rate: frame_rate.ok_or_else(|| Error::parse("Y4M header lacks F"))?,
    })
}

fn parse_dim(value: &str, what: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::parse(format!("invalid {what} `{value}`"))),
    }
}

fn check_colorspace(value: &str) -> Result<()> {
    match value {
        "420" | "420jpeg" | "420paldv" | "420mpeg2" => Ok(()),
        other => Err(Error::UnsupportedFormat(format!(
            "colorspace `{other}`; only 8-bit 4:2:0 is supported"
        ))),
    }
}

/// Reads one `\n`-terminated line without the terminator. `Ok(None)` at EOF
/// before any byte; a line cut off by EOF is a parse error.
fn read_line<R: BufRead>(reader: &mut R) -> Result<Option<Vec<u8>>> {
    let mut line = Vec::new();
    let n = reader
        .take(MAX_LINE as u64 + 1)
        .read_until(b'\n', &mut line)?;
    if n == 0 {
        return Ok(None);
    }
    if line.last() != Some(&b'\n') {
        return Err(if line.len() > MAX_LINE {
            Error::parse("line exceeds maximum header length")
        } else {
            Error::parse("unterminated line")
        });
    }
    line.pop();
    Ok(Some(line))
}

/// Reads up to `len` bytes, growing the buffer only as data arrives.
fn read_exact_bounded<R: Read>(reader: &mut R, len: usize) -> io::Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(len.min(READ_STEP));
    reader.take(len as u64).read_to_end(&mut buf)?;
    Ok(buf)
}
