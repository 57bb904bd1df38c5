from dqaoa.cli import main
import sys
sys.exit(main())
