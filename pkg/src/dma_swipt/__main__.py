import sys

from dma_swipt.cli import main

sys.exit(main())
