//! Wire protocol between clients and the relay.

mod codec;
mod message;
pub mod sample;

pub use codec::{
    decode, decode_payload, encode, encode_payload, frame_stream, split_frame, DecodeError, EncodeError,
    FrameDecoder, LENGTH_PREFIX, MAX_FRAME_LEN,
};
pub use message::{Body, Message, SketchOp};
