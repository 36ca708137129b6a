//! Wait-free single-producer/single-consumer parameter handoff between a control thread
//! and the render thread.
//!
//! The render side picks up the newest published value at a block boundary; intermediate
//! values published within one block are skipped.

use triple_buffer::{Input, Output, TripleBuffer};

use crate::psymap::SynthParams;

pub struct ParamSender {
    input: Input<SynthParams>,
}

pub struct ParamReceiver {
    output: Output<SynthParams>,
}

/// Creates a connected sender/receiver pair holding `initial`.
pub fn param_channel(initial: SynthParams) -> (ParamSender, ParamReceiver) {
    let (input, output) = TripleBuffer::new(&initial).split();
    (ParamSender { input }, ParamReceiver { output })
}

impl ParamSender {
    pub fn publish(&mut self, params: SynthParams) {
        self.input.write(params);
    }
}

impl ParamReceiver {
    /// Newest published parameters. Never blocks and never allocates.
    pub fn latest(&mut self) -> SynthParams {
        *self.output.read()
    }

    /// Whether something was published since the last [`ParamReceiver::latest`].
    pub fn has_update(&self) -> bool {
        self.output.updated()
    }
}
