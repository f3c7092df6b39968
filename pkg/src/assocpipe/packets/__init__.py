from .compress import IntegrityError, gzip_compress, gzip_uncompress
from .fields import (
    FIELD_NAMES,
    FrameTimeFormatter,
    MalformedPacket,
    PacketFields,
    TSVFormatError,
    extract_fields,
    parse_packets,
    read_tsv,
    sortable_time,
    write_tsv,
)
from .generate import GenConfig, build_frame, dataset_truth, generate_capture, generate_dataset, read_truth
from .pcap import (
    GlobalHeader,
    PcapError,
    RawPacket,
    TruncatedError,
    first_timestamp_us,
    read_header,
    read_pcap,
    split_pcap,
    write_pcap,
)
