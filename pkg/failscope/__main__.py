from failscope.cli import main

raise SystemExit(main())
