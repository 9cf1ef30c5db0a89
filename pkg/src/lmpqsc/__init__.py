"""List-message-passing decoders for LDPC codes on the q-ary symmetric channel."""

__version__ = "0.1.0"
